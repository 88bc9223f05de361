//! NR_HE: the Naor-Reingold PRF z = g^(a_0 · prod a_i^(x_i)) evaluated
//! through an ephemeral Paillier key chosen by the user.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BackendFlags, Oprf, OprfKind, SMALL_SPACE};
use crate::arith::{random_prime, ModRing, Natural};
use crate::canon;
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupParams, PrimeOrderGroup};
use crate::paillier::{Ciphertext, PaillierKeys, PaillierPublic};

/// An l-bit input, serialized as a string of '0'/'1'.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn from_u64(v: u64, len: usize) -> Self {
        Self((0..len).map(|i| (v >> (len - 1 - i)) & 1 == 1).collect())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>())
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{self:?}"))
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(serde::de::Error::custom("bit strings contain only 0 and 1")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(BitString)
    }
}

/// ω = g^(a_0 / prod r_i); the nonces r_i stay with the IdP.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NrOmega<I: Natural> {
    pub w: GroupElement<I>,
    #[serde(skip)]
    pub nonces: Vec<I>,
}

impl<I: Natural> PartialEq for NrOmega<I> {
    fn eq(&self, other: &Self) -> bool {
        self.w == other.w
    }
}

/// The ephemeral Paillier key (as its primes) and the 2l encryption nonces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NrBlind<I: Natural> {
    #[serde(with = "canon::hex")]
    pub p: I,
    #[serde(with = "canon::hex")]
    pub q: I,
    #[serde(with = "canon::hex_vec")]
    pub rho: Vec<I>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NrBlinded<I: Natural> {
    #[serde(with = "canon::hex")]
    pub he_modulus: I,
    /// (Enc(1 - x_i), Enc(x_i)) per bit.
    pub pairs: Vec<(Ciphertext<I>, Ciphertext<I>)>,
}

#[derive(Clone, Debug)]
pub struct NrHe<I: Natural> {
    pub group: GroupParams<I>,
    pub bit_len: usize,
    /// Size of the user's ephemeral Paillier modulus.
    pub he_bits: u64,
}

impl<I: Natural> NrHe<I> {
    pub fn new(group: GroupParams<I>, bit_len: usize, he_bits: u64) -> Result<Self> {
        if bit_len == 0 || he_bits <= group.n.bits() + 1 {
            return Err(Error::ParameterGeneration("NR_HE needs l >= 1 and a Paillier modulus above n".into()));
        }
        Ok(Self { group, bit_len, he_bits })
    }

    fn check_key(&self, key: &[I]) -> Result<()> {
        if key.len() != self.bit_len + 1 || key.iter().any(|a| a.is_zero() || a >= &self.group.n) {
            return Err(Error::Domain(format!("NR_HE key needs {} nonzero scalars", self.bit_len + 1)));
        }
        Ok(())
    }

    fn ephemeral_keys(&self, t: &NrBlind<I>) -> Result<PaillierKeys<I>> {
        PaillierKeys::from_primes(t.p.clone(), t.q.clone())
    }
}

impl<I: Natural> Oprf for NrHe<I> {
    type Int = I;
    type Key = Vec<I>;
    type Input = BitString;
    type Blinded = NrBlinded<I>;
    type Evaluated = Vec<Ciphertext<I>>;
    type Output = GroupElement<I>;
    type Omega = NrOmega<I>;
    type Blind = NrBlind<I>;

    fn kind(&self) -> OprfKind {
        OprfKind::NrHe
    }

    fn flags(&self) -> BackendFlags {
        BackendFlags::for_kind(OprfKind::NrHe, false)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "backend": OprfKind::NrHe,
            "group": self.group.describe(),
            "bit_len": self.bit_len,
            "ephemeral_he_bits": self.he_bits,
        })
    }

    fn random_key<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Vec<I>> {
        let ring = self.group.scalars();
        Ok((0..=self.bit_len).map(|_| ring.random_nonzero(rng)).collect())
    }

    fn key_escrow(&self, key: &Vec<I>) -> serde_json::Value {
        serde_json::json!({"a": key.iter().map(Natural::to_hex).collect::<Vec<_>>()})
    }

    /// All (l+1)-tuples of nonzero scalars, when there are few enough.
    fn small_keys(&self) -> Option<Vec<Vec<I>>> {
        let n = self.group.n.to_u64()?;
        let count = (n - 1).checked_pow(self.bit_len as u32 + 1)?;
        if count > SMALL_SPACE {
            return None;
        }
        let mut keys = vec![Vec::new()];
        for _ in 0..=self.bit_len {
            keys = keys
                .into_iter()
                .flat_map(|k: Vec<I>| {
                    (1..n).map(move |a| {
                        let mut k = k.clone();
                        k.push(I::from_u64(a));
                        k
                    })
                })
                .collect();
        }
        Some(keys)
    }

    fn small_inputs(&self) -> Option<Vec<BitString>> {
        if self.bit_len > 16 {
            return None;
        }
        Some((0..1u64 << self.bit_len).map(|v| BitString::from_u64(v, self.bit_len)).collect())
    }

    /// t is an ephemeral Paillier key rather than an invertible scalar;
    /// two fresh ones stand in for "every t".
    fn small_blinds<R: RngCore + ?Sized>(&self, omega: Option<&NrOmega<I>>, rng: &mut R) -> Option<Vec<NrBlind<I>>> {
        self.group.n.to_u64().filter(|n| *n <= SMALL_SPACE)?;
        (0..2).map(|_| self.random_blind(omega, rng).ok()).collect()
    }

    fn key_secrets(&self, key: &Vec<I>) -> Vec<String> {
        key.iter().map(Natural::to_hex).collect()
    }

    fn random_input<R: RngCore + ?Sized>(&self, rng: &mut R) -> BitString {
        BitString((0..self.bit_len).map(|_| rng.next_u32() & 1 == 1).collect())
    }

    fn validate_input(&self, x: &BitString) -> Result<()> {
        if x.0.len() != self.bit_len {
            return Err(Error::Domain(format!("NR_HE input must have {} bits", self.bit_len)));
        }
        Ok(())
    }

    fn evaluate(&self, key: &Vec<I>, x: &BitString) -> Result<GroupElement<I>> {
        self.check_key(key)?;
        self.validate_input(x)?;
        let ring = self.group.scalars();
        let e = x.0.iter().zip(&key[1..]).filter(|(b, _)| **b).fold(key[0].clone(), |acc, (_, a)| ring.mul(&acc, a));
        Ok(self.group.gen_exp(&e))
    }

    fn gen_omega<R: RngCore + ?Sized>(&self, key: &Vec<I>, rng: &mut R) -> Result<NrOmega<I>> {
        self.check_key(key)?;
        let ring = self.group.scalars();
        let nonces: Vec<I> = (0..self.bit_len).map(|_| ring.random_nonzero(rng)).collect();
        let mut e = key[0].clone();
        for r in &nonces {
            e = ring.mul(&e, &ring.inv(r)?);
        }
        Ok(NrOmega { w: self.group.gen_exp(&e), nonces })
    }

    fn random_blind<R: RngCore + ?Sized>(&self, _omega: Option<&NrOmega<I>>, rng: &mut R) -> Result<NrBlind<I>> {
        for _ in 0..256 {
            let p: I = random_prime(self.he_bits.div_ceil(2), rng)?;
            let q: I = random_prime(self.he_bits / 2, rng)?;
            if p == q || PaillierKeys::from_primes(p.clone(), q.clone()).is_err() {
                continue;
            }
            let units = ModRing::new(p.clone() * q.clone());
            let rho = (0..2 * self.bit_len).map(|_| units.random_unit(rng)).collect();
            return Ok(NrBlind { p, q, rho });
        }
        Err(Error::ParameterGeneration("no ephemeral Paillier key".into()))
    }

    fn blind_with(&self, x: &BitString, t: &NrBlind<I>, _omega: Option<&NrOmega<I>>) -> Result<NrBlinded<I>> {
        self.validate_input(x)?;
        if t.rho.len() != 2 * self.bit_len {
            return Err(Error::Malformed("NR_HE blinding state has the wrong nonce count".into()));
        }
        let pk = self.ephemeral_keys(t)?.public;
        let (zero, one) = (I::zero(), I::one());
        let pairs =
            x.0.iter()
                .zip(t.rho.chunks(2))
                .map(|(b, rho)| {
                    let (m0, m1) = if *b { (&zero, &one) } else { (&one, &zero) };
                    Ok((pk.encrypt_with(m0, &rho[0])?, pk.encrypt_with(m1, &rho[1])?))
                })
                .collect::<Result<Vec<_>>>()?;
        Ok(NrBlinded { he_modulus: pk.he_modulus, pairs })
    }

    fn serve(&self, key: &Vec<I>, x_prime: &NrBlinded<I>, omega: Option<&NrOmega<I>>) -> Result<Vec<Ciphertext<I>>> {
        self.check_key(key)?;
        let omega = omega.ok_or_else(|| Error::Malformed("NR_HE serving needs omega".into()))?;
        if omega.nonces.len() != self.bit_len || x_prime.pairs.len() != self.bit_len {
            return Err(Error::Malformed("NR_HE vector length mismatch".into()));
        }
        if x_prime.he_modulus <= self.group.n {
            return Err(Error::Malformed("ephemeral Paillier modulus too small".into()));
        }
        let pk = PaillierPublic::new(x_prime.he_modulus.clone());
        let ring = self.group.scalars();
        x_prime
            .pairs
            .iter()
            .zip(omega.nonces.iter().zip(&key[1..]))
            .map(|((c0, c1), (r, a))| {
                if !pk.is_well_formed(c0) || !pk.is_well_formed(c1) {
                    return Err(Error::Malformed("NR_HE ciphertext not a unit below N^2".into()));
                }
                Ok(pk.add(&pk.scale(c0, r), &pk.scale(c1, &ring.mul(r, a))))
            })
            .collect()
    }

    fn unblind(
        &self,
        z_prime: &Vec<Ciphertext<I>>,
        x: &BitString,
        t: &NrBlind<I>,
        omega: Option<&NrOmega<I>>,
    ) -> Result<GroupElement<I>> {
        self.validate_input(x)?;
        let omega = omega.ok_or_else(|| Error::Malformed("NR_HE unblinding needs omega".into()))?;
        if z_prime.len() != self.bit_len || !self.group.contains(&omega.w) {
            return Err(Error::Malformed("NR_HE response malformed".into()));
        }
        let sk = self.ephemeral_keys(t)?;
        let ring = self.group.scalars();
        let mut e = I::one();
        for c in z_prime {
            e = ring.mul(&e, &ring.reduce(&sk.decrypt(c)?));
        }
        Ok(self.group.exp(&omega.w, &e))
    }

    fn decode_blinded(&self, v: &serde_json::Value) -> Result<NrBlinded<I>> {
        let b: NrBlinded<I> = canon::from_value(v)?;
        let pk = PaillierPublic::new(b.he_modulus.clone());
        if b.pairs.len() != self.bit_len || b.pairs.iter().any(|(c0, c1)| !pk.is_well_formed(c0) || !pk.is_well_formed(c1)) {
            return Err(Error::Malformed("NR_HE blinded vector malformed".into()));
        }
        Ok(b)
    }

    fn decode_evaluated(&self, v: &serde_json::Value) -> Result<Vec<Ciphertext<I>>> {
        canon::from_value(v)
    }

    fn random_blinded<R: RngCore + ?Sized>(&self, omega: Option<&NrOmega<I>>, rng: &mut R) -> Result<NrBlinded<I>> {
        let x = self.random_input(rng);
        let t = self.random_blind(omega, rng)?;
        self.blind_with(&x, &t, omega)
    }

    /// The IdP sees only the ephemeral modulus and fresh ciphertexts.
    fn server_features(&self, _key: &Vec<I>, x_prime: &NrBlinded<I>, _rp_inputs: &[BitString]) -> Vec<u64> {
        vec![super::digest_bucket(&canon::to_value(x_prime), 1 << 16)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oprf::round_trip;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn desk() -> NrHe<u64> {
        NrHe::new(GroupParams::desk(), 2, 20).unwrap()
    }

    #[test]
    fn desk_value() {
        let b = desk();
        assert_eq!(b.evaluate(&vec![3, 4, 5], &BitString(vec![true, false])).unwrap(), GroupElement(2));
        assert_eq!(BitString::from_u64(2, 2), BitString(vec![true, false]));
    }

    #[test]
    fn bit_string_encoding() {
        let x = BitString(vec![true, false, true]);
        assert_eq!(canon::to_value(&x), serde_json::json!("101"));
        assert_eq!(canon::from_value::<BitString>(&serde_json::json!("101")).unwrap(), x);
        assert!(canon::from_value::<BitString>(&serde_json::json!("12")).is_err());
    }

    #[test]
    fn omega_hides_nonces_on_the_wire() {
        let b = desk();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let w = b.gen_omega(&vec![3, 4, 5], &mut rng).unwrap();
        let v = canon::to_value(&w);
        assert!(v.get("nonces").is_none());
        let back: NrOmega<u64> = canon::from_value(&v).unwrap();
        assert!(back.nonces.is_empty());
        assert!(b.serve(&vec![3, 4, 5], &b.random_blinded(None, &mut rng).unwrap(), Some(&back)).is_err());
    }

    #[test]
    fn round_trips() {
        let b = desk();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..30 {
            let k = b.random_key(&mut rng).unwrap();
            let x = b.random_input(&mut rng);
            assert_eq!(round_trip(&b, &k, &x, &mut rng).unwrap(), b.evaluate(&k, &x).unwrap());
        }
    }
}
