//! Unsigned integer carriers and modular arithmetic.
//!
//! Everything above this module is generic over [`Natural`], so the same
//! protocol code runs on `u64` (desk-scale parameters, exhaustive oracles)
//! and on `BigUint` (lab and full parameters).

use std::fmt::Debug;
use std::hash::Hash;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// An unsigned integer type usable as the carrier for all modular arithmetic.
pub trait Natural: Integer + Clone + Hash + Debug + Send + Sync + 'static {
    fn from_u64(v: u64) -> Self;
    fn to_u64(&self) -> Option<u64>;
    /// Number of significant bits (0 for zero).
    fn bits(&self) -> u64;
    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self;
    fn pow_mod(&self, exp: &Self, m: &Self) -> Self;
    /// Minimal big-endian encoding; zero encodes as a single zero byte.
    fn to_bytes_be(&self) -> Vec<u8>;
    /// `None` when the value does not fit the carrier.
    fn from_bytes_be(bytes: &[u8]) -> Option<Self>;
    /// Uniform in `[0, bound)`.
    fn random_below<R: RngCore + ?Sized>(bound: &Self, rng: &mut R) -> Self;
    /// Uniform with exactly `bits` significant bits (top bit forced).
    fn random_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Self;

    fn to_hex(&self) -> String {
        let bytes = self.to_bytes_be();
        let mut s = String::with_capacity(bytes.len() * 2);
        for b in &bytes {
            s.push_str(&format!("{b:02x}"));
        }
        let trimmed = s.trim_start_matches('0');
        if trimmed.is_empty() {
            "0".to_owned()
        } else {
            trimmed.to_owned()
        }
    }

    fn from_hex(s: &str) -> Option<Self> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return None;
        }
        let padded = if s.len() % 2 == 1 { format!("0{s}") } else { s.to_owned() };
        let bytes: Option<Vec<u8>> =
            (0..padded.len()).step_by(2).map(|i| u8::from_str_radix(&padded[i..i + 2], 16).ok()).collect();
        Self::from_bytes_be(&bytes?)
    }

    fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.to_bytes_be())
    }

    fn from_biguint(v: &BigUint) -> Option<Self> {
        Self::from_bytes_be(&v.to_bytes_be())
    }
}

impl Natural for u64 {
    fn from_u64(v: u64) -> Self {
        v
    }
    fn to_u64(&self) -> Option<u64> {
        Some(*self)
    }
    fn bits(&self) -> u64 {
        u64::from(64 - self.leading_zeros())
    }
    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self {
        ((u128::from(*self) * u128::from(*rhs)) % u128::from(*m)) as u64
    }
    fn pow_mod(&self, exp: &Self, m: &Self) -> Self {
        if *m == 1 {
            return 0;
        }
        let mut base = self % m;
        let mut e = *exp;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_mod(&base, m);
            }
            base = base.mul_mod(&base, m);
            e >>= 1;
        }
        acc
    }
    fn to_bytes_be(&self) -> Vec<u8> {
        let raw = self.to_be_bytes();
        let first = raw.iter().position(|b| *b != 0).unwrap_or(7);
        raw[first..].to_vec()
    }
    fn from_bytes_be(bytes: &[u8]) -> Option<Self> {
        let first = bytes.iter().position(|b| *b != 0).unwrap_or(bytes.len());
        let tail = &bytes[first..];
        if tail.len() > 8 {
            return None;
        }
        Some(tail.iter().fold(0u64, |acc, b| (acc << 8) | u64::from(*b)))
    }
    fn random_below<R: RngCore + ?Sized>(bound: &Self, rng: &mut R) -> Self {
        rng.gen_range(0..*bound)
    }
    fn random_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Self {
        assert!((1..=64).contains(&bits), "u64 carrier holds at most 64 bits");
        let top = 1u64 << (bits - 1);
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        (rng.next_u64() & mask) | top
    }
}

impl Natural for BigUint {
    fn from_u64(v: u64) -> Self {
        BigUint::from(v)
    }
    fn to_u64(&self) -> Option<u64> {
        ToPrimitive::to_u64(self)
    }
    fn bits(&self) -> u64 {
        BigUint::bits(self)
    }
    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self {
        (self * rhs) % m
    }
    fn pow_mod(&self, exp: &Self, m: &Self) -> Self {
        self.modpow(exp, m)
    }
    fn to_bytes_be(&self) -> Vec<u8> {
        BigUint::to_bytes_be(self)
    }
    fn from_bytes_be(bytes: &[u8]) -> Option<Self> {
        Some(BigUint::from_bytes_be(bytes))
    }
    fn random_below<R: RngCore + ?Sized>(bound: &Self, rng: &mut R) -> Self {
        let mut adapter = RngAdapter(rng);
        adapter.gen_biguint_below(bound)
    }
    fn random_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Self {
        let mut adapter = RngAdapter(rng);
        let mut v = adapter.gen_biguint(bits);
        v.set_bit(bits - 1, true);
        v
    }
    fn to_biguint(&self) -> BigUint {
        self.clone()
    }
    fn from_biguint(v: &BigUint) -> Option<Self> {
        Some(v.clone())
    }
}

// `RandBigInt` is only implemented for sized `Rng`s.
struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

pub fn add_mod<I: Natural>(a: &I, b: &I, m: &I) -> I {
    (a.clone() % m.clone() + b.clone() % m.clone()) % m.clone()
}

pub fn sub_mod<I: Natural>(a: &I, b: &I, m: &I) -> I {
    let a = a.clone() % m.clone();
    let b = b.clone() % m.clone();
    if a >= b {
        a - b
    } else {
        m.clone() - (b - a)
    }
}

/// Modular inverse by extended Euclid, with coefficients kept reduced mod `m`
/// so no signed arithmetic is needed.
pub fn mod_inverse<I: Natural>(a: &I, m: &I) -> Result<I> {
    if m.is_zero() {
        return Err(Error::Domain("inverse modulo zero".into()));
    }
    let (mut old_r, mut r) = (a.clone() % m.clone(), m.clone());
    let (mut old_s, mut s) = (I::one() % m.clone(), I::zero());
    while !r.is_zero() {
        let (q, rem) = old_r.div_rem(&r);
        old_r = std::mem::replace(&mut r, rem);
        let qs = q.mul_mod(&s, m);
        let next = sub_mod(&old_s, &qs, m);
        old_s = std::mem::replace(&mut s, next);
    }
    if !old_r.is_one() {
        return Err(Error::NotInvertible { gcd: old_r.to_hex(), modulus: m.to_hex() });
    }
    Ok(old_s)
}

/// Arithmetic in Z_m for a fixed modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModRing<I> {
    modulus: I,
}

impl<I: Natural> ModRing<I> {
    pub fn new(modulus: I) -> Self {
        assert!(!modulus.is_zero(), "zero modulus");
        Self { modulus }
    }
    pub fn modulus(&self) -> &I {
        &self.modulus
    }
    pub fn reduce(&self, a: &I) -> I {
        a.clone() % self.modulus.clone()
    }
    pub fn add(&self, a: &I, b: &I) -> I {
        add_mod(a, b, &self.modulus)
    }
    pub fn sub(&self, a: &I, b: &I) -> I {
        sub_mod(a, b, &self.modulus)
    }
    pub fn mul(&self, a: &I, b: &I) -> I {
        a.mul_mod(b, &self.modulus)
    }
    pub fn pow(&self, a: &I, e: &I) -> I {
        a.pow_mod(e, &self.modulus)
    }
    pub fn inv(&self, a: &I) -> Result<I> {
        mod_inverse(a, &self.modulus)
    }
    pub fn is_unit(&self, a: &I) -> bool {
        !self.modulus.is_one() && a.gcd(&self.modulus).is_one()
    }
    pub fn random<R: RngCore + ?Sized>(&self, rng: &mut R) -> I {
        I::random_below(&self.modulus, rng)
    }
    /// Uniform over the nonzero residues.
    pub fn random_nonzero<R: RngCore + ?Sized>(&self, rng: &mut R) -> I {
        let below = self.modulus.clone() - I::one();
        I::random_below(&below, rng) + I::one()
    }
    /// Uniform over the units (rejection sampling).
    pub fn random_unit<R: RngCore + ?Sized>(&self, rng: &mut R) -> I {
        loop {
            let c = self.random_nonzero(rng);
            if self.is_unit(&c) {
                return c;
            }
        }
    }
}

const SMALL_PRIMES: [u64; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

/// Miller-Rabin with the first fifteen prime bases (deterministic below
/// 3.3e24) plus `extra_rounds` random bases for larger inputs.
pub fn is_probable_prime<I: Natural, R: RngCore + ?Sized>(n: &I, extra_rounds: usize, rng: &mut R) -> bool {
    let two = I::from_u64(2);
    if *n < two {
        return false;
    }
    for p in SMALL_PRIMES {
        let p = I::from_u64(p);
        if *n == p {
            return true;
        }
        if (n.clone() % p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n.clone() - I::one();
    let mut d = n_minus_1.clone();
    let mut s = 0u32;
    while d.is_even() {
        d = d / two.clone();
        s += 1;
    }
    let witness = |a: &I| -> bool {
        let mut x = a.pow_mod(&d, n);
        if x.is_one() || x == n_minus_1 {
            return false;
        }
        for _ in 1..s {
            x = x.mul_mod(&x, n);
            if x == n_minus_1 {
                return false;
            }
        }
        true
    };
    if SMALL_PRIMES.iter().any(|p| witness(&I::from_u64(*p))) {
        return false;
    }
    if n.bits() > 80 {
        let span = n.clone() - I::from_u64(3);
        for _ in 0..extra_rounds {
            let a = I::random_below(&span, rng) + two.clone();
            if witness(&a) {
                return false;
            }
        }
    }
    true
}

/// Random prime with exactly `bits` bits.
pub fn random_prime<I: Natural, R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<I> {
    if bits < 2 {
        return Err(Error::ParameterGeneration(format!("no {bits}-bit primes")));
    }
    let bound = 200 * bits.max(8) * bits.max(8);
    for _ in 0..bound {
        let mut c: I = I::random_bits(bits, rng);
        if bits > 2 && c.is_even() {
            c = c + I::one();
            if c.bits() != bits {
                continue;
            }
        }
        if is_probable_prime(&c, 24, rng) {
            return Ok(c);
        }
    }
    Err(Error::ParameterGeneration(format!("no {bits}-bit prime found in {bound} candidates")))
}

/// Multiplicative order of `a` modulo `m` by stepping; only for tiny moduli.
pub fn naive_order(a: u64, m: u64) -> Option<u64> {
    if num_integer::gcd(a, m) != 1 {
        return None;
    }
    let mut x = a % m;
    for k in 1..=m {
        if x == 1 % m {
            return Some(k);
        }
        x = x.mul_mod(&a, &m);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(&3u64, &11).unwrap(), 4);
        assert_eq!(mod_inverse(&1u64, &11).unwrap(), 1);
        match mod_inverse(&4u64, &22) {
            Err(Error::NotInvertible { gcd, .. }) => assert_eq!(gcd, "2"),
            other => panic!("expected gcd error, got {other:?}"),
        }
    }

    #[test]
    fn hex_roundtrip_and_canonical_form() {
        assert_eq!(0u64.to_hex(), "0");
        assert_eq!(255u64.to_hex(), "ff");
        assert_eq!(4096u64.to_hex(), "1000");
        assert_eq!(u64::from_hex("1000"), Some(4096));
        assert_eq!(u64::from_hex("0x10"), None);
        assert_eq!(u64::from_hex("ABC"), None);
        assert_eq!(u64::from_hex("1ffffffffffffffff"), None);
        let big = BigUint::from_hex("1ffffffffffffffff").unwrap();
        assert_eq!(big.to_hex(), "1ffffffffffffffff");
    }

    #[test]
    fn primality_matches_trial_division() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for n in 0u64..2000 {
            let trial = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_probable_prime(&n, 4, &mut rng), trial, "n={n}");
        }
        // Carmichael numbers.
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911] {
            assert!(!is_probable_prime(&n, 4, &mut rng));
        }
    }

    #[test]
    fn random_prime_has_requested_width() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for bits in [5u64, 16, 31, 63] {
            let p: u64 = random_prime(bits, &mut rng).unwrap();
            assert_eq!(Natural::bits(&p), bits);
        }
        let p: BigUint = random_prime(96, &mut rng).unwrap();
        assert_eq!(Natural::bits(&p), 96);
    }

    proptest! {
        #[test]
        fn inverse_property(a in 1u64..10_000, m in 2u64..10_000) {
            match mod_inverse(&a, &m) {
                Ok(inv) => prop_assert_eq!(a.mul_mod(&inv, &m), 1 % m),
                Err(Error::NotInvertible { gcd, .. }) => {
                    prop_assert_eq!(u64::from_hex(&gcd).unwrap(), num_integer::gcd(a, m));
                    prop_assert!(num_integer::gcd(a, m) > 1);
                }
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }

        #[test]
        fn carriers_agree(a in any::<u64>(), b in any::<u64>(), e in any::<u32>(), m in 2u64..u64::MAX) {
            let (ba, bb, be, bm) = (BigUint::from(a), BigUint::from(b), BigUint::from(e), BigUint::from(m));
            prop_assert_eq!(a.mul_mod(&b, &m).to_biguint(), ba.mul_mod(&bb, &bm));
            prop_assert_eq!(a.pow_mod(&u64::from(e), &m).to_biguint(), ba.pow_mod(&be, &bm));
            prop_assert_eq!(sub_mod(&a, &b, &m).to_biguint(), sub_mod(&ba, &bb, &bm));
            prop_assert_eq!(a.to_hex(), ba.to_hex());
        }
    }
}
