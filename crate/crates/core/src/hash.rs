//! Hashing into integer ranges.

use sha2::{Digest, Sha256};

use crate::arith::Natural;

/// SHA-256 over a length-prefixed encoding of `(tag, parts)`, expanded in
/// counter mode and rejection-sampled into `[0, modulus)`.
pub fn hash_to_range<I: Natural>(tag: &str, parts: &[&[u8]], modulus: &I) -> I {
    let mut seed = Sha256::new();
    seed.update((tag.len() as u64).to_be_bytes());
    seed.update(tag.as_bytes());
    for p in parts {
        seed.update((p.len() as u64).to_be_bytes());
        seed.update(p);
    }
    let seed = seed.finalize();
    let bits = modulus.bits();
    let width = bits.div_ceil(8) as usize;
    let top_mask = if bits.is_multiple_of(8) { 0xff } else { (1u8 << (bits % 8)) - 1 };
    for attempt in 0u64.. {
        let mut bytes = Vec::with_capacity(width + 32);
        let mut block = 0u32;
        while bytes.len() < width {
            let mut h = Sha256::new();
            h.update(seed);
            h.update(attempt.to_be_bytes());
            h.update(block.to_be_bytes());
            bytes.extend_from_slice(&h.finalize());
            block += 1;
        }
        bytes.truncate(width);
        if let Some(first) = bytes.first_mut() {
            *first &= top_mask;
        }
        let v = I::from_bytes_be(&bytes).expect("value narrower than the modulus");
        if v < *modulus {
            return v;
        }
    }
    unreachable!("rejection sampling terminates with probability one")
}

pub fn hash_to_scalar<I: Natural>(tag: &str, bytes: &[u8], modulus: &I) -> I {
    hash_to_range(tag, &[bytes], modulus)
}

/// H_2(x, y) into Z_N.
pub fn hash_to_group_output<I: Natural>(x: &I, y: &I, modulus: &I) -> I {
    hash_to_range("idtsso/h2", &[&x.to_bytes_be(), &y.to_bytes_be()], modulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use std::collections::HashSet;

    #[test]
    fn deterministic_and_in_range() {
        assert_eq!(hash_to_group_output(&2u64, &32, &35), hash_to_group_output(&2u64, &32, &35));
        for x in 0..200u64 {
            assert!(hash_to_group_output(&x, &(x * 3), &35) < 35);
        }
    }

    #[test]
    fn domain_separation() {
        assert_ne!(
            hash_to_range::<BigUint>("a", &[b"xy"], &BigUint::from(u128::MAX)),
            hash_to_range::<BigUint>("a", &[b"x", b"y"], &BigUint::from(u128::MAX)),
        );
    }

    #[test]
    fn uniform_over_small_modulus() {
        // Chi-square goodness of fit against uniform on Z_35 at alpha = 0.01.
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let mut counts = [0u64; 35];
        let samples = 10_000u64;
        for _ in 0..samples {
            let (x, y) = (rng.gen::<u64>(), rng.gen::<u64>());
            counts[hash_to_group_output(&x, &y, &35u64) as usize] += 1;
        }
        let expected = samples as f64 / 35.0;
        let stat: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(34.0).unwrap().cdf(stat);
        assert!(p > 0.01, "chi-square {stat}, p = {p}");
    }

    #[test]
    fn no_collisions_on_wide_modulus() {
        let modulus = BigUint::from(u128::MAX) - BigUint::from(158u32);
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let (x, y) = (BigUint::from(rng.gen::<u64>()), BigUint::from(rng.gen::<u64>()));
            assert!(seen.insert(hash_to_group_output(&x, &y, &modulus)));
        }
    }
}
