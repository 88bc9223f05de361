//! RSA moduli carrying one or more (e, k) exponent pairs.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::arith::{mod_inverse, random_prime, sub_mod, Natural};
use crate::canon;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ExponentPair<I: Natural> {
    #[serde(with = "canon::hex")]
    pub e: I,
    #[serde(with = "canon::hex")]
    pub k: I,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsaParams<I: Natural> {
    pub modulus: I,
    phi: I,
    carmichael: I,
    pub exponent_pairs: Vec<ExponentPair<I>>,
}

/// Two distinct members of 𝕖 whose difference lands in 𝕖.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferenceViolation {
    pub minuend: String,
    pub subtrahend: String,
    pub difference: String,
    /// `true` when found after reduction mod phi(N).
    pub modular: bool,
}

impl<I: Natural> RsaParams<I> {
    pub fn from_primes(p: I, q: I, exponents: &[I]) -> Result<Self> {
        if p == q {
            return Err(Error::ParameterGeneration("RSA primes must differ".into()));
        }
        let modulus = p.clone() * q.clone();
        let (p1, q1) = (p - I::one(), q - I::one());
        let phi = p1.clone() * q1.clone();
        let carmichael = p1.lcm(&q1);
        let mut pairs = Vec::with_capacity(exponents.len());
        for e in exponents {
            let k = mod_inverse(e, &phi)?;
            pairs.push(ExponentPair { e: e.clone(), k });
        }
        Ok(Self { modulus, phi, carmichael, exponent_pairs: pairs })
    }

    /// N = 35 with 𝕖 = {5, 7, 11}.
    pub fn desk() -> Self {
        let f = I::from_u64;
        Self::from_primes(f(5), f(7), &[f(5), f(7), f(11)]).expect("fixed desk exponents")
    }

    /// Small distinct moduli, one exponent pair each.
    pub fn desk_distinct() -> Vec<Self> {
        let f = I::from_u64;
        [(5, 7, 5), (3, 11, 3), (3, 13, 5), (5, 11, 3), (3, 17, 3), (3, 19, 5)]
            .iter()
            .map(|&(p, q, e)| Self::from_primes(f(p), f(q), &[f(e)]).expect("fixed desk moduli"))
            .collect()
    }

    pub fn phi(&self) -> &I {
        &self.phi
    }

    /// lambda(N): every unit's order divides it.
    pub fn carmichael(&self) -> &I {
        &self.carmichael
    }

    pub fn public_exponents(&self) -> Vec<I> {
        self.exponent_pairs.iter().map(|p| p.e.clone()).collect()
    }

    pub fn check_difference_free(&self) -> std::result::Result<(), DifferenceViolation> {
        difference_violation(&self.public_exponents(), &self.phi).map_or(Ok(()), Err)
    }
}

/// Check the exponent-set policy both over the integers and mod phi.
pub fn difference_violation<I: Natural>(set: &[I], phi: &I) -> Option<DifferenceViolation> {
    for a in set {
        for b in set {
            if a == b {
                continue;
            }
            if a > b {
                let d = a.clone() - b.clone();
                if set.contains(&d) {
                    return Some(violation(a, b, &d, false));
                }
            }
            let d = sub_mod(a, b, phi);
            if set.iter().any(|e| e.clone() % phi.clone() == d) {
                return Some(violation(a, b, &d, true));
            }
        }
    }
    None
}

fn violation<I: Natural>(a: &I, b: &I, d: &I, modular: bool) -> DifferenceViolation {
    DifferenceViolation { minuend: a.to_hex(), subtrahend: b.to_hex(), difference: d.to_hex(), modular }
}

/// Generate a `bits`-bit modulus with `key_count` exponent pairs.
///
/// Exponents are random odd values below phi(N), pairwise distinct modulo
/// lambda(N) and never 1 modulo lambda(N), so distinct keys give distinct
/// maps x -> x^k.
pub fn gen_rsa<I: Natural, R: RngCore + ?Sized>(
    bits: u64,
    key_count: usize,
    difference_free: bool,
    rng: &mut R,
) -> Result<RsaParams<I>> {
    if key_count == 0 {
        return Err(Error::ParameterGeneration("key_count must be at least 1".into()));
    }
    for _ in 0..64 {
        let p: I = random_prime(bits.div_ceil(2), rng)?;
        let q: I = random_prime(bits / 2, rng)?;
        if p == q || (p.clone() * q.clone()).bits() != bits {
            continue;
        }
        let base = RsaParams::from_primes(p, q, &[])?;
        let Some(exps) = pick_exponents(&base, key_count, rng) else { continue };
        if difference_free && difference_violation(&exps, &base.phi).is_some() {
            continue;
        }
        let RsaParams { modulus, phi, carmichael, .. } = base;
        let pairs = exps
            .into_iter()
            .map(|e| {
                let k = mod_inverse(&e, &phi)?;
                Ok(ExponentPair { e, k })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(RsaParams { modulus, phi, carmichael, exponent_pairs: pairs });
    }
    Err(Error::ParameterGeneration(format!("no {bits}-bit modulus supports {key_count} exponent pairs")))
}

fn pick_exponents<I: Natural, R: RngCore + ?Sized>(base: &RsaParams<I>, count: usize, rng: &mut R) -> Option<Vec<I>> {
    let lambda = &base.carmichael;
    let mut out: Vec<I> = Vec::with_capacity(count);
    let three = I::from_u64(3);
    if base.phi <= three {
        return None;
    }
    let span = base.phi.clone() - three.clone();
    for _ in 0..(count * 64 + 64) {
        if out.len() == count {
            break;
        }
        let mut e = I::random_below(&span, rng) + three.clone();
        if e.is_even() {
            e = e + I::one();
        }
        let residue = e.clone() % lambda.clone();
        if e >= base.phi || !e.gcd(&base.phi).is_one() || residue.is_one() || residue.is_zero() {
            continue;
        }
        if out.iter().any(|o| o.clone() % lambda.clone() == residue) {
            continue;
        }
        out.push(e);
    }
    (out.len() == count).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn desk_pairs() {
        let r = RsaParams::<u64>::desk();
        assert_eq!(r.modulus, 35);
        assert_eq!(*r.phi(), 24);
        let ks: Vec<u64> = r.exponent_pairs.iter().map(|p| p.k).collect();
        assert_eq!(ks, [5, 7, 11]);
        assert!(r.check_difference_free().is_ok());
    }

    #[test]
    fn round_trip_exhaustive_desk() {
        let r = RsaParams::<u64>::desk();
        for pair in &r.exponent_pairs {
            for x in 1..35u64 {
                if num_integer::gcd(x, 35) == 1 {
                    assert_eq!(x.pow_mod(&pair.e, &35).pow_mod(&pair.k, &35), x);
                }
            }
        }
        for m in RsaParams::<u64>::desk_distinct() {
            let pair = &m.exponent_pairs[0];
            for x in 1..m.modulus {
                if num_integer::gcd(x, m.modulus) == 1 {
                    assert_eq!(x.pow_mod(&pair.e, &m.modulus).pow_mod(&pair.k, &m.modulus), x);
                }
            }
        }
    }

    #[test]
    fn difference_policy() {
        assert!(difference_violation(&[5u64, 7, 11], &24).is_none());
        assert!(difference_violation(&[5u64], &24).is_none());
        let v = difference_violation(&[5u64, 7, 2], &24).unwrap();
        assert!(!v.modular);
        assert_eq!(v.difference, "2");
        // 3 - 5 = -2 = 22 mod 24.
        let v = difference_violation(&[3u64, 5, 22], &24).unwrap();
        assert!(v.modular);
    }

    #[test]
    fn generated_parameters() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let r: RsaParams<num_bigint::BigUint> = gen_rsa(128, 4, true, &mut rng).unwrap();
        assert_eq!(Natural::bits(&r.modulus), 128);
        assert_eq!(r.exponent_pairs.len(), 4);
        assert!(r.check_difference_free().is_ok());
        for p in &r.exponent_pairs {
            assert_eq!(p.e.mul_mod(&p.k, r.phi()), num_bigint::BigUint::from(1u8));
        }
        let single: RsaParams<u64> = gen_rsa(24, 1, true, &mut rng).unwrap();
        assert!(single.check_difference_free().is_ok());
    }
}
