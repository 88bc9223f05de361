//! 2HashRSA: z = H_2(x, x^k) with blinding x' = x·t^e.
//!
//! One struct covers both deployments: a distinct modulus per key
//! (2HashRSA) and one shared modulus carrying many exponent pairs
//! (2HashRSA_N).

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{BackendFlags, Oprf, OprfKind, RootOracle, Scalar, SMALL_SPACE};
use crate::arith::{naive_order, ModRing, Natural};
use crate::canon;
use crate::error::{Error, Result};
use crate::hash::hash_to_group_output;
use crate::rsa::RsaParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RsaKey {
    pub modulus: usize,
    pub pair: usize,
}

/// ω = e, together with the modulus it belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RsaOmega<I: Natural> {
    #[serde(with = "canon::hex")]
    pub modulus: I,
    #[serde(with = "canon::hex")]
    pub e: I,
}

#[derive(Clone, Debug)]
pub struct TwoHashRsa<I: Natural> {
    pub moduli: Vec<RsaParams<I>>,
    shared: bool,
    /// Refuse x' = 1 and x' = N - 1 at the server. Without this, anyone who
    /// knows x^k of a victim can pass PID_RP checking (see `unity_forgeries`).
    pub reject_unity_blinded: bool,
}

/// Inputs to search when asking for full multiplicative order.
const ORDER_SCAN_LIMIT: u64 = 1 << 20;

impl<I: Natural> TwoHashRsa<I> {
    /// 2HashRSA_N: every key is an exponent pair on one modulus.
    pub fn shared(params: RsaParams<I>) -> Self {
        Self { moduli: vec![params], shared: true, reject_unity_blinded: true }
    }

    /// 2HashRSA: the first exponent pair of each modulus is one key.
    pub fn distinct(moduli: Vec<RsaParams<I>>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::ParameterGeneration("2HashRSA needs at least one modulus".into()));
        }
        let moduli = moduli
            .into_iter()
            .map(|mut m| {
                m.exponent_pairs.truncate(1);
                m
            })
            .collect();
        Ok(Self { moduli, shared: false, reject_unity_blinded: true })
    }

    /// The literal server with no unity filter.
    pub fn literal(mut self) -> Self {
        self.reject_unity_blinded = false;
        self
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    pub fn keys(&self) -> Vec<RsaKey> {
        self.moduli
            .iter()
            .enumerate()
            .flat_map(|(m, p)| (0..p.exponent_pairs.len()).map(move |pair| RsaKey { modulus: m, pair }))
            .collect()
    }

    pub fn omega_of(&self, key: &RsaKey) -> Result<RsaOmega<I>> {
        let params = self.params(key)?;
        Ok(RsaOmega { modulus: params.modulus.clone(), e: params.exponent_pairs[key.pair].e.clone() })
    }

    fn params(&self, key: &RsaKey) -> Result<&RsaParams<I>> {
        self.moduli
            .get(key.modulus)
            .filter(|p| key.pair < p.exponent_pairs.len())
            .ok_or_else(|| Error::Domain(format!("no RSA key {key:?}")))
    }

    /// Modulus a login runs under: ω's, or the shared one.
    fn login_modulus(&self, omega: Option<&RsaOmega<I>>) -> Result<I> {
        match omega {
            Some(w) => {
                if !self.moduli.iter().any(|p| p.modulus == w.modulus) {
                    return Err(Error::Domain("omega names an unknown modulus".into()));
                }
                Ok(w.modulus.clone())
            }
            None if self.shared => Ok(self.moduli[0].modulus.clone()),
            None => Err(Error::Malformed("2HashRSA needs omega to know N".into())),
        }
    }

    fn min_modulus(&self) -> &I {
        self.moduli.iter().map(|p| &p.modulus).min().expect("at least one modulus")
    }

    fn unit_of(&self, v: &I, n: &I, what: &str) -> Result<()> {
        if v.is_zero() || v >= n || !v.gcd(n).is_one() {
            return Err(Error::Domain(format!("{what} must be a unit below N")));
        }
        Ok(())
    }

    fn is_unity(v: &I, n: &I) -> bool {
        v.is_one() || *v == n.clone() - I::one()
    }
}

impl<I: Natural> Oprf for TwoHashRsa<I> {
    type Int = I;
    type Key = RsaKey;
    type Input = Scalar<I>;
    type Blinded = Scalar<I>;
    type Evaluated = Scalar<I>;
    type Output = Scalar<I>;
    type Omega = RsaOmega<I>;
    type Blind = Scalar<I>;

    fn kind(&self) -> OprfKind {
        if self.shared {
            OprfKind::TwoHashRsaN
        } else {
            OprfKind::TwoHashRsa
        }
    }

    fn flags(&self) -> BackendFlags {
        BackendFlags::for_kind(self.kind(), false)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "backend": self.kind(),
            "moduli": self.moduli.iter().map(|p| p.modulus.to_hex()).collect::<Vec<_>>(),
            "reject_unity_blinded": self.reject_unity_blinded,
        })
    }

    fn random_key<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<RsaKey> {
        let keys = self.keys();
        let i = u64::random_below(&(keys.len() as u64), rng) as usize;
        Ok(keys[i])
    }

    fn key_space(&self) -> Option<usize> {
        Some(self.keys().len())
    }

    fn small_keys(&self) -> Option<Vec<RsaKey>> {
        self.min_modulus().to_u64().filter(|n| *n <= SMALL_SPACE)?;
        Some(self.keys())
    }

    fn small_inputs(&self) -> Option<Vec<Scalar<I>>> {
        let bound = self.min_modulus().to_u64().filter(|n| *n <= SMALL_SPACE)?;
        Some((1..bound).map(I::from_u64).filter(|x| self.moduli.iter().all(|p| x.gcd(&p.modulus).is_one())).map(Scalar).collect())
    }

    /// On a small shared modulus registration insists on full order.
    fn small_registrable_inputs(&self) -> Option<Vec<Scalar<I>>> {
        let inputs = self.small_inputs()?;
        if !self.shared {
            return Some(inputs);
        }
        let n = self.moduli[0].modulus.to_u64()?;
        let lambda = self.moduli[0].carmichael().to_u64()?;
        Some(inputs.into_iter().filter(|x| naive_order(x.0.to_u64().expect("small"), n) == Some(lambda)).collect())
    }

    fn small_blinds<R: RngCore + ?Sized>(&self, omega: Option<&RsaOmega<I>>, _rng: &mut R) -> Option<Vec<Scalar<I>>> {
        let n = self.login_modulus(omega).ok()?;
        let bound = n.to_u64().filter(|n| *n <= SMALL_SPACE)?;
        Some((1..bound).map(I::from_u64).filter(|t| t.gcd(&n).is_one()).map(Scalar).collect())
    }

    fn key_escrow(&self, key: &RsaKey) -> serde_json::Value {
        match self.params(key) {
            Ok(p) => {
                let pair = &p.exponent_pairs[key.pair];
                serde_json::json!({"modulus": p.modulus.to_hex(), "e": pair.e.to_hex(), "k": pair.k.to_hex()})
            }
            Err(_) => serde_json::Value::Null,
        }
    }

    fn key_secrets(&self, key: &RsaKey) -> Vec<String> {
        self.params(key).map(|p| vec![p.exponent_pairs[key.pair].k.to_hex()]).unwrap_or_default()
    }

    /// A unit modulo every modulus; on small shared moduli, one of full
    /// order lambda(N) so that distinct keys give distinct x^k.
    fn random_input<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar<I> {
        let bound = self.min_modulus().clone();
        let small = self.shared.then(|| bound.to_u64().filter(|n| *n < ORDER_SCAN_LIMIT)).flatten();
        let lambda = self.moduli[0].carmichael().to_u64();
        loop {
            let x = I::random_below(&bound, rng);
            if x.is_zero() || !self.moduli.iter().all(|p| x.gcd(&p.modulus).is_one()) {
                continue;
            }
            if let (Some(n), Some(lambda)) = (small, lambda) {
                if naive_order(x.to_u64().expect("below a small modulus"), n) != Some(lambda) {
                    continue;
                }
            }
            return Scalar(x);
        }
    }

    fn validate_input(&self, x: &Scalar<I>) -> Result<()> {
        if x.0 >= *self.min_modulus() {
            return Err(Error::Domain("x must lie below every modulus".into()));
        }
        for p in &self.moduli {
            self.unit_of(&x.0, &p.modulus, "x")?;
        }
        Ok(())
    }

    fn evaluate(&self, key: &RsaKey, x: &Scalar<I>) -> Result<Scalar<I>> {
        self.validate_input(x)?;
        let p = self.params(key)?;
        let y = x.0.pow_mod(&p.exponent_pairs[key.pair].k, &p.modulus);
        Ok(Scalar(hash_to_group_output(&x.0, &y, &p.modulus)))
    }

    fn gen_omega<R: RngCore + ?Sized>(&self, key: &RsaKey, _rng: &mut R) -> Result<RsaOmega<I>> {
        self.omega_of(key)
    }

    fn random_blind<R: RngCore + ?Sized>(&self, omega: Option<&RsaOmega<I>>, rng: &mut R) -> Result<Scalar<I>> {
        let n = self.login_modulus(omega)?;
        Ok(Scalar(ModRing::new(n).random_unit(rng)))
    }

    fn blind_with(&self, x: &Scalar<I>, t: &Scalar<I>, omega: Option<&RsaOmega<I>>) -> Result<Scalar<I>> {
        let omega = omega.ok_or_else(|| Error::Malformed("2HashRSA blinding needs e".into()))?;
        let n = self.login_modulus(Some(omega))?;
        self.unit_of(&x.0, &n, "x")?;
        self.unit_of(&t.0, &n, "t")?;
        Ok(Scalar(x.0.mul_mod(&t.0.pow_mod(&omega.e, &n), &n)))
    }

    fn serve(&self, key: &RsaKey, x_prime: &Scalar<I>, _omega: Option<&RsaOmega<I>>) -> Result<Scalar<I>> {
        let p = self.params(key)?;
        self.unit_of(&x_prime.0, &p.modulus, "x'")?;
        if self.reject_unity_blinded && Self::is_unity(&x_prime.0, &p.modulus) {
            return Err(Error::Domain("x' = +-1 is refused".into()));
        }
        Ok(Scalar(x_prime.0.pow_mod(&p.exponent_pairs[key.pair].k, &p.modulus)))
    }

    fn unblind(&self, z_prime: &Scalar<I>, x: &Scalar<I>, t: &Scalar<I>, omega: Option<&RsaOmega<I>>) -> Result<Scalar<I>> {
        let n = self.login_modulus(omega)?;
        self.unit_of(&z_prime.0, &n, "z'")?;
        let ring = ModRing::new(n.clone());
        let y = ring.mul(&z_prime.0, &ring.inv(&t.0)?);
        Ok(Scalar(hash_to_group_output(&x.0, &y, &n)))
    }

    fn decode_blinded(&self, v: &serde_json::Value) -> Result<Scalar<I>> {
        canon::from_value(v)
    }

    fn decode_evaluated(&self, v: &serde_json::Value) -> Result<Scalar<I>> {
        canon::from_value(v)
    }

    fn login_public_params(&self, omega: Option<&RsaOmega<I>>) -> serde_json::Value {
        match self.login_modulus(omega) {
            Ok(n) => serde_json::json!({"N": n.to_hex()}),
            Err(_) => serde_json::Value::Null,
        }
    }

    /// With a modulus per key, UBL needs ω = (N, e) from the token.
    fn token_carries_omega(&self, pid_checking: bool) -> bool {
        !self.shared || pid_checking
    }

    fn random_blinded<R: RngCore + ?Sized>(&self, omega: Option<&RsaOmega<I>>, rng: &mut R) -> Result<Scalar<I>> {
        let n = self.login_modulus(omega)?;
        Ok(Scalar(ModRing::new(n).random_unit(rng)))
    }

    /// Which known e satisfies x·t^e = x'.
    fn restore_bl_argument(
        &self,
        x: &Scalar<I>,
        x_prime: &Scalar<I>,
        t: &Scalar<I>,
        known: &[RsaOmega<I>],
    ) -> Option<serde_json::Value> {
        known
            .iter()
            .find(|w| self.blind_with(x, t, Some(w)).is_ok_and(|b| b == *x_prime))
            .map(|w| serde_json::json!(w.e.to_hex()))
    }

    fn related_blinds(&self, t: &Scalar<I>) -> Vec<Scalar<I>> {
        if !self.shared {
            return Vec::new();
        }
        let ring = ModRing::new(self.moduli[0].modulus.clone());
        let mut out = vec![ring.mul(&t.0, &t.0), ring.add(&t.0, &t.0), ring.sub(&I::zero(), &t.0)];
        out.retain(|s| ring.is_unit(s) && *s != t.0);
        out.into_iter().map(Scalar).collect()
    }

    fn exposed_intermediate(&self, key: &RsaKey, x: &Scalar<I>) -> Option<Scalar<I>> {
        let p = self.params(key).ok()?;
        Some(Scalar(x.0.pow_mod(&p.exponent_pairs[key.pair].k, &p.modulus)))
    }

    fn forge_from_intermediates(
        &self,
        t: &Scalar<I>,
        own: &Scalar<I>,
        target: &Scalar<I>,
        omega: Option<&RsaOmega<I>>,
    ) -> Option<Scalar<I>> {
        let ring = ModRing::new(self.login_modulus(omega).ok()?);
        Some(Scalar(ring.mul(&ring.mul(&own.0, &t.0), &ring.inv(&target.0).ok()?)))
    }

    /// For u = +-1: PID_RP = u^e and t = u / x^k pass the check
    /// x·t^e = PID_RP, and (u^e)^k' / t = x^k for every odd k'.
    fn unity_forgeries(&self, target: &Scalar<I>, omega_target: &RsaOmega<I>) -> Vec<(Scalar<I>, Scalar<I>)> {
        let n = omega_target.modulus.clone();
        let ring = ModRing::new(n.clone());
        let Ok(inv) = ring.inv(&target.0) else { return Vec::new() };
        [I::one(), n.clone() - I::one()]
            .into_iter()
            .map(|u| (Scalar(ring.pow(&u, &omega_target.e)), Scalar(ring.mul(&u, &inv))))
            .collect()
    }

    /// t^(e_t - e_h) = x^(k_t·e_h) / x, solved with the oracle; then
    /// PID_RP = x·t^(e_t) passes the check under e_t and unblinds to x^(k_t)
    /// under the adversary's key.
    fn root_oracle_forgery(
        &self,
        x: &Scalar<I>,
        target: &Scalar<I>,
        omega_hat: &RsaOmega<I>,
        omega_target: &RsaOmega<I>,
        oracle: &dyn RootOracle,
    ) -> Option<(Scalar<I>, Scalar<I>)> {
        let n = omega_target.modulus.clone();
        let ring = ModRing::new(n.clone());
        let rhs = ring.mul(&ring.pow(&target.0, &omega_hat.e), &ring.inv(&x.0).ok()?);
        let (e_t, e_h) = (omega_target.e.to_biguint(), omega_hat.e.to_biguint());
        let t = if e_t > e_h {
            let r = oracle.root(&(e_t - e_h), &rhs.to_biguint(), &n.to_biguint())?;
            I::from_biguint(&r)?
        } else if e_h > e_t {
            let r = oracle.root(&(e_h - e_t), &rhs.to_biguint(), &n.to_biguint())?;
            ring.inv(&I::from_biguint(&r)?).ok()?
        } else {
            return None;
        };
        let x_prime = ring.mul(&x.0, &ring.pow(&t, &omega_target.e));
        Some((Scalar(x_prime), Scalar(t)))
    }
}
