//! DY_HE: z = g^(1/(k+x)) evaluated through Paillier with ω = Enc(k).
//!
//! The user sends x' = (ω·Enc(x))^t · Enc(n·r). The mask term keeps the
//! integer plaintext t(k+x) + n·r from revealing k+x through divisibility;
//! the server only ever uses it modulo n.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{BackendFlags, Oprf, OprfKind, Scalar, SMALL_SPACE};
use crate::arith::{mod_inverse, ModRing, Natural};
use crate::canon;
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupParams, PrimeOrderGroup};
use crate::paillier::{Ciphertext, PaillierKeys, PaillierPublic};

/// Every random choice BL makes: the blinding exponent plus encryption and
/// mask randomness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DyBlind<I: Natural> {
    #[serde(with = "canon::hex")]
    pub t: I,
    #[serde(with = "canon::hex")]
    pub rho_x: I,
    #[serde(with = "canon::hex")]
    pub mask: I,
    #[serde(with = "canon::hex")]
    pub rho_mask: I,
}

#[derive(Clone, Debug)]
pub struct DyHe<I: Natural> {
    pub group: GroupParams<I>,
    he: PaillierKeys<I>,
    pub deterministic: bool,
    pub masked: bool,
}

impl<I: Natural> DyHe<I> {
    /// `he` must leave room for t(k+x) < 2n^2 plus at least one mask step.
    pub fn new(group: GroupParams<I>, he: PaillierKeys<I>, deterministic: bool) -> Result<Self> {
        let n = group.n.clone();
        let floor = I::from_u64(2) * n.clone() * n.clone() + n.clone() + I::one();
        if he.public.he_modulus <= floor {
            return Err(Error::ParameterGeneration("Paillier modulus must exceed 2n^2 + n".into()));
        }
        Ok(Self { group, he, deterministic, masked: true })
    }

    /// Drop the mask term; only for demonstrating why it is there.
    pub fn unmasked(mut self) -> Self {
        self.masked = false;
        self
    }

    pub fn he_public(&self) -> &PaillierPublic<I> {
        &self.he.public
    }

    fn small_order(&self) -> Option<u64> {
        self.n().to_u64().filter(|n| *n <= SMALL_SPACE)
    }

    fn n(&self) -> &I {
        &self.group.n
    }

    /// Exclusive bound on the mask r so t(k+x) + n·r < N_he.
    fn mask_bound(&self) -> I {
        let n = self.n().clone();
        let two_n_sq = I::from_u64(2) * n.clone() * n.clone();
        (self.he.public.he_modulus.clone() - two_n_sq - I::one()) / n
    }

    fn enc(&self, m: &I, rho: &I) -> Result<Ciphertext<I>> {
        if self.deterministic {
            self.he.public.encrypt_deterministic(m)
        } else {
            self.he.public.encrypt_with(m, rho)
        }
    }

    fn mask_ciphertext(&self, t: &DyBlind<I>) -> Result<Ciphertext<I>> {
        self.enc(&(self.n().clone() * t.mask.clone()), &t.rho_mask)
    }

    fn check_blind(&self, t: &DyBlind<I>) -> Result<()> {
        let nhe = &self.he.public.he_modulus;
        if t.t.is_zero() || t.t >= *self.n() || t.mask >= self.mask_bound() {
            return Err(Error::Domain("DY_HE blinding state out of range".into()));
        }
        if !self.deterministic && (!t.rho_x.gcd(nhe).is_one() || !t.rho_mask.gcd(nhe).is_one()) {
            return Err(Error::Domain("encryption randomness must be a unit".into()));
        }
        Ok(())
    }

    /// (x' / Enc(n·r))^(1/t) / Enc(x), which is ω itself whenever
    /// encryption is deterministic.
    pub fn restore_omega(&self, x: &Scalar<I>, x_prime: &Ciphertext<I>, t: &DyBlind<I>) -> Result<Ciphertext<I>> {
        let pk = &self.he.public;
        let unmasked = pk.add(x_prime, &pk.negate(&self.mask_ciphertext(t)?)?);
        let t_inv = mod_inverse(&t.t, &pk.he_modulus)?;
        let root = pk.scale(&unmasked, &t_inv);
        Ok(pk.add(&root, &pk.negate(&self.enc(&x.0, &t.rho_x)?)?))
    }
}

impl<I: Natural> Oprf for DyHe<I> {
    type Int = I;
    type Key = I;
    type Input = Scalar<I>;
    type Blinded = Ciphertext<I>;
    type Evaluated = GroupElement<I>;
    type Output = GroupElement<I>;
    type Omega = Ciphertext<I>;
    type Blind = DyBlind<I>;

    fn kind(&self) -> OprfKind {
        OprfKind::DyHe
    }

    fn flags(&self) -> BackendFlags {
        BackendFlags::for_kind(OprfKind::DyHe, self.deterministic)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "backend": OprfKind::DyHe,
            "group": self.group.describe(),
            "he_modulus": self.he.public.he_modulus.to_hex(),
            "deterministic_he": self.deterministic,
            "masked": self.masked,
        })
    }

    fn random_key<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<I> {
        Ok(self.group.scalars().random_nonzero(rng))
    }

    fn key_escrow(&self, key: &I) -> serde_json::Value {
        serde_json::json!({"k": key.to_hex()})
    }

    fn key_secrets(&self, key: &I) -> Vec<String> {
        vec![key.to_hex()]
    }

    fn small_keys(&self) -> Option<Vec<I>> {
        Some((1..self.small_order()?).map(I::from_u64).collect())
    }

    fn small_inputs(&self) -> Option<Vec<Scalar<I>>> {
        Some((1..self.small_order()?).map(|i| Scalar(I::from_u64(i))).collect())
    }

    fn small_blinds<R: RngCore + ?Sized>(&self, omega: Option<&Ciphertext<I>>, rng: &mut R) -> Option<Vec<DyBlind<I>>> {
        (1..self.small_order()?).map(|t| self.random_blind(omega, rng).ok().map(|b| DyBlind { t: I::from_u64(t), ..b })).collect()
    }

    fn random_input<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar<I> {
        Scalar(self.group.scalars().random_nonzero(rng))
    }

    fn validate_input(&self, x: &Scalar<I>) -> Result<()> {
        if x.0 >= *self.n() {
            return Err(Error::Domain("DY_HE input must lie in Z_n".into()));
        }
        Ok(())
    }

    fn evaluate(&self, key: &I, x: &Scalar<I>) -> Result<GroupElement<I>> {
        self.validate_input(x)?;
        let s = self.group.scalars().add(key, &x.0);
        if s.is_zero() {
            return Err(Error::Degenerate("k + x = 0 mod n".into()));
        }
        Ok(self.group.gen_exp(&self.group.scalars().inv(&s)?))
    }

    fn gen_omega<R: RngCore + ?Sized>(&self, key: &I, rng: &mut R) -> Result<Ciphertext<I>> {
        if self.deterministic {
            self.he.public.encrypt_deterministic(key)
        } else {
            self.he.public.encrypt(key, rng)
        }
    }

    fn random_blind<R: RngCore + ?Sized>(&self, _omega: Option<&Ciphertext<I>>, rng: &mut R) -> Result<DyBlind<I>> {
        let units = ModRing::new(self.he.public.he_modulus.clone());
        let mask = if self.masked { I::random_below(&self.mask_bound(), rng) } else { I::zero() };
        Ok(DyBlind {
            t: self.group.scalars().random_nonzero(rng),
            rho_x: units.random_unit(rng),
            mask,
            rho_mask: units.random_unit(rng),
        })
    }

    fn blind_with(&self, x: &Scalar<I>, t: &DyBlind<I>, omega: Option<&Ciphertext<I>>) -> Result<Ciphertext<I>> {
        self.validate_input(x)?;
        self.check_blind(t)?;
        let omega = omega.ok_or_else(|| Error::Malformed("DY_HE blinding needs omega".into()))?;
        let pk = &self.he.public;
        if !pk.is_well_formed(omega) {
            return Err(Error::Malformed("omega is not a Paillier ciphertext".into()));
        }
        let base = pk.add(omega, &self.enc(&x.0, &t.rho_x)?);
        Ok(pk.add(&pk.scale(&base, &t.t), &self.mask_ciphertext(t)?))
    }

    fn serve(&self, _key: &I, x_prime: &Ciphertext<I>, _omega: Option<&Ciphertext<I>>) -> Result<GroupElement<I>> {
        let d = self.he.decrypt(x_prime)? % self.n().clone();
        if d.is_zero() {
            return Err(Error::Degenerate("Dec(x') = 0 mod n".into()));
        }
        Ok(self.group.gen_exp(&self.group.scalars().inv(&d)?))
    }

    fn unblind(
        &self,
        z_prime: &GroupElement<I>,
        _x: &Scalar<I>,
        t: &DyBlind<I>,
        _omega: Option<&Ciphertext<I>>,
    ) -> Result<GroupElement<I>> {
        if !self.group.contains(z_prime) {
            return Err(Error::Domain("z' is not a subgroup element".into()));
        }
        Ok(self.group.exp(z_prime, &t.t))
    }

    fn decode_blinded(&self, v: &serde_json::Value) -> Result<Ciphertext<I>> {
        let c: Ciphertext<I> = canon::from_value(v)?;
        if !self.he.public.is_well_formed(&c) {
            return Err(Error::Malformed("x' is not a Paillier ciphertext".into()));
        }
        Ok(c)
    }

    fn decode_evaluated(&self, v: &serde_json::Value) -> Result<GroupElement<I>> {
        self.group.decode(v)
    }

    fn random_blinded<R: RngCore + ?Sized>(&self, _omega: Option<&Ciphertext<I>>, rng: &mut R) -> Result<Ciphertext<I>> {
        let m = I::random_below(&self.he.public.he_modulus, rng);
        self.he.public.encrypt(&m, rng)
    }

    /// The IdP decrypts: the residue mod n, and whether the integer
    /// plaintext is divisible by k + x_j for each registered input.
    fn server_features(&self, key: &I, x_prime: &Ciphertext<I>, rp_inputs: &[Scalar<I>]) -> Vec<u64> {
        let Ok(d) = self.he.decrypt(x_prime) else { return vec![u64::MAX] };
        let n = self.n().clone();
        let mut out = vec![(d.clone() % n).to_u64().unwrap_or(u64::MAX)];
        for x in rp_inputs {
            let s = key.clone() + x.0.clone();
            out.push(u64::from(!s.is_zero() && (d.clone() % s).is_zero()));
        }
        out
    }

    fn restore_bl_argument(
        &self,
        x: &Scalar<I>,
        x_prime: &Ciphertext<I>,
        t: &DyBlind<I>,
        _known: &[Ciphertext<I>],
    ) -> Option<serde_json::Value> {
        self.restore_omega(x, x_prime, t).ok().map(|c| canon::to_value(&c))
    }

    fn related_blinds(&self, t: &DyBlind<I>) -> Vec<DyBlind<I>> {
        let ring = self.group.scalars();
        [ring.add(&t.t, &I::one()), ring.add(&t.t, &t.t)]
            .into_iter()
            .filter(|s| !s.is_zero() && *s != t.t)
            .map(|s| DyBlind { t: s, ..t.clone() })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oprf::round_trip;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn desk(deterministic: bool) -> DyHe<u64> {
        DyHe::new(GroupParams::desk(), PaillierKeys::desk(), deterministic).unwrap()
    }

    #[test]
    fn desk_values() {
        let b = desk(false);
        let x = Scalar(5);
        assert_eq!(b.evaluate(&3, &x).unwrap(), GroupElement(13));
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let omega = b.gen_omega(&3, &mut rng).unwrap();
        let t = DyBlind { t: 2, rho_x: 17, mask: 0, rho_mask: 19 };
        let x_prime = b.blind_with(&x, &t, Some(&omega)).unwrap();
        assert_eq!(b.he.decrypt(&x_prime).unwrap(), 16);
        let z_prime = b.serve(&3, &x_prime, Some(&omega)).unwrap();
        assert_eq!(z_prime, GroupElement(6));
        assert_eq!(b.unblind(&z_prime, &x, &t, Some(&omega)).unwrap(), GroupElement(13));
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let b = desk(false);
        assert!(matches!(b.evaluate(&3, &Scalar(8)), Err(Error::Degenerate(_))));
        let zero = b.he_public().encrypt_with(&22, &5).unwrap();
        assert!(matches!(b.serve(&3, &zero, None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn omega_modes() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let p = desk(false);
        let (a, c) = (p.gen_omega(&4, &mut rng).unwrap(), p.gen_omega(&4, &mut rng).unwrap());
        assert_ne!(a, c);
        assert_eq!(p.he.decrypt(&a).unwrap(), 4);
        assert_eq!(p.he.decrypt(&c).unwrap(), 4);
        let d = desk(true);
        assert_eq!(d.gen_omega(&4, &mut rng).unwrap(), d.gen_omega(&4, &mut rng).unwrap());
    }

    #[test]
    fn deterministic_mode_leaks_omega() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let b = desk(true);
        let omega = b.gen_omega(&7, &mut rng).unwrap();
        for _ in 0..20 {
            let x = b.random_input(&mut rng);
            let t = b.random_blind(Some(&omega), &mut rng).unwrap();
            let x_prime = b.blind_with(&x, &t, Some(&omega)).unwrap();
            assert_eq!(b.restore_omega(&x, &x_prime, &t).unwrap(), omega);
        }
    }

    #[test]
    fn masked_plaintext_hides_divisibility() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let b = desk(false);
        let plain = desk(false).unmasked();
        let (k, x) = (3u64, Scalar(5));
        let omega = b.gen_omega(&k, &mut rng).unwrap();
        let inputs = [x.clone()];
        let mut divisible = 0;
        for _ in 0..200 {
            let t = plain.random_blind(Some(&omega), &mut rng).unwrap();
            let f = plain.server_features(&k, &plain.blind_with(&x, &t, Some(&omega)).unwrap(), &inputs);
            assert_eq!(f[1], 1);
            let t = b.random_blind(Some(&omega), &mut rng).unwrap();
            divisible += b.server_features(&k, &b.blind_with(&x, &t, Some(&omega)).unwrap(), &inputs)[1];
        }
        // k + x = 8, so about one masked plaintext in eight is divisible.
        assert!(divisible < 60, "{divisible}");
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for det in [false, true] {
            let b = desk(det);
            for _ in 0..50 {
                let k = b.random_key(&mut rng).unwrap();
                let x = b.random_input(&mut rng);
                if b.evaluate(&k, &x).is_err() {
                    continue;
                }
                assert_eq!(round_trip(&b, &k, &x, &mut rng).unwrap(), b.evaluate(&k, &x).unwrap());
            }
        }
    }
}
