//! Schnorr signatures over the RFC 5114 1024/160 group.
//!
//! The signing group is fixed regardless of the OPRF parameter tier, so a
//! desk-scale protocol run still gets a signature that does not collide by
//! accident.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::arith::{add_mod, sub_mod, Natural};
use crate::canon;
use crate::group::{rfc5114_1024_160, GroupParams, PrimeOrderGroup};
use crate::hash::hash_to_scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    #[serde(with = "canon::hex")]
    pub e: BigUint,
    #[serde(with = "canon::hex")]
    pub s: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyingKey {
    #[serde(with = "canon::hex")]
    pub y: BigUint,
}

pub struct SigningKey {
    group: GroupParams<BigUint>,
    x: BigUint,
    public: VerifyingKey,
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKey").field("public", &self.public).finish_non_exhaustive()
    }
}

fn challenge(group: &GroupParams<BigUint>, r: &BigUint, y: &BigUint, msg: &[u8]) -> BigUint {
    let mut input = Vec::with_capacity(msg.len() + 256);
    for part in [r.to_bytes_be(), y.to_bytes_be()] {
        input.extend((part.len() as u64).to_be_bytes());
        input.extend(part);
    }
    input.extend(msg);
    hash_to_scalar("idtsso/schnorr", &input, &group.n)
}

impl SigningKey {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let group = rfc5114_1024_160::<BigUint>();
        let x = group.scalars().random_nonzero(rng);
        let y = group.g.pow_mod(&x, &group.q);
        Self { group, x, public: VerifyingKey { y } }
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        &self.public
    }

    pub fn sign<R: RngCore + ?Sized>(&self, msg: &[u8], rng: &mut R) -> Signature {
        let g = &self.group;
        let k = g.scalars().random_nonzero(rng);
        let r = g.g.pow_mod(&k, &g.q);
        let e = challenge(g, &r, &self.public.y, msg);
        let s = add_mod(&k, &e.mul_mod(&self.x, &g.n), &g.n);
        Signature { e, s }
    }
}

impl VerifyingKey {
    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        let g = rfc5114_1024_160::<BigUint>();
        if sig.e >= g.n || sig.s >= g.n || self.y.is_zero() || !g.contains(&crate::group::GroupElement(self.y.clone())) {
            return false;
        }
        // R = g^s * y^(-e)
        let neg_e = sub_mod(&BigUint::zero(), &sig.e, &g.n);
        let r = g.g.pow_mod(&sig.s, &g.q).mul_mod(&self.y.pow_mod(&neg_e, &g.q), &g.q);
        challenge(&g, &r, &self.y, msg) == sig.e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sign_verify_and_tamper() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let sk = SigningKey::generate(&mut rng);
        let msg = b"{\"pid_rp\":\"6\"}".to_vec();
        let sig = sk.sign(&msg, &mut rng);
        assert!(sk.verifying_key().verify(&msg, &sig));
        for i in 0..msg.len() * 8 {
            let mut m = msg.clone();
            m[i / 8] ^= 1 << (i % 8);
            assert!(!sk.verifying_key().verify(&m, &sig), "bit {i}");
        }
        let rotated = SigningKey::generate(&mut rng);
        let sig2 = rotated.sign(&msg, &mut rng);
        assert!(!sk.verifying_key().verify(&msg, &sig2));
        let bad = Signature { e: sig.e.clone(), s: &sig.s + 1u32 };
        assert!(!sk.verifying_key().verify(&msg, &bad));
    }
}
