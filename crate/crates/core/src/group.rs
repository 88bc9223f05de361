//! Prime-order groups: the order-n subgroup of F_q* and (in `curve`) a
//! short-Weierstrass curve group.

use std::fmt::Debug;
use std::hash::Hash;

use num_traits::One;
use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::arith::{is_probable_prime, random_prime, ModRing, Natural};
use crate::canon;
use crate::error::{Error, Result};

/// Multiplicatively written group of prime order.
pub trait PrimeOrderGroup: Clone + Debug + Send + Sync + 'static {
    type Int: Natural;
    type Element: Clone + Debug + Eq + Hash + Ord + Serialize + DeserializeOwned + Send + Sync + 'static;

    fn order(&self) -> &Self::Int;
    fn generator(&self) -> Self::Element;
    fn identity(&self) -> Self::Element;
    fn op(&self, a: &Self::Element, b: &Self::Element) -> Self::Element;
    /// `base^s`, or `[s]base` on a curve.
    fn exp(&self, base: &Self::Element, s: &Self::Int) -> Self::Element;
    fn contains(&self, e: &Self::Element) -> bool;
    /// Unambiguous byte encoding, used as hash input.
    fn encode(&self, e: &Self::Element) -> Vec<u8>;
    /// Public parameters as a canonical document.
    fn describe(&self) -> serde_json::Value;

    fn scalars(&self) -> ModRing<Self::Int> {
        ModRing::new(self.order().clone())
    }

    fn gen_exp(&self, s: &Self::Int) -> Self::Element {
        self.exp(&self.generator(), s)
    }

    fn invert(&self, e: &Self::Element) -> Self::Element {
        let n_minus_1 = self.order().clone() - Self::Int::one();
        self.exp(e, &n_minus_1)
    }

    /// Uniform non-identity element.
    fn random_element<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Element {
        let s = self.scalars().random_nonzero(rng);
        self.gen_exp(&s)
    }

    /// Deserialize and check subgroup membership.
    fn decode(&self, v: &serde_json::Value) -> Result<Self::Element> {
        let e: Self::Element = canon::from_value(v)?;
        if self.contains(&e) {
            Ok(e)
        } else {
            Err(Error::Domain(format!("{v} is not in the prime-order subgroup")))
        }
    }
}

/// Element of the order-n subgroup of F_q*.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct GroupElement<I: Natural>(#[serde(with = "canon::hex")] pub I);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GroupParams<I: Natural> {
    #[serde(with = "canon::hex")]
    pub q: I,
    #[serde(with = "canon::hex")]
    pub n: I,
    #[serde(with = "canon::hex")]
    pub g: I,
}

impl<I: Natural> GroupParams<I> {
    /// Validating constructor.
    pub fn new(q: I, n: I, g: I) -> Result<Self> {
        let mut rng = rand::rngs::mock::StepRng::new(7, 0x9e37_79b9_7f4a_7c15);
        if !is_probable_prime(&q, 16, &mut rng) || !is_probable_prime(&n, 16, &mut rng) {
            return Err(Error::Domain("q and n must be prime".into()));
        }
        if !((q.clone() - I::one()) % n.clone()).is_zero() {
            return Err(Error::Domain("n must divide q-1".into()));
        }
        if g.is_one() || g >= q || !g.pow_mod(&n, &q).is_one() {
            return Err(Error::Domain("g must generate the order-n subgroup".into()));
        }
        Ok(Self { q, n, g })
    }

    /// q=23, n=11, g=2.
    pub fn desk() -> Self {
        Self { q: I::from_u64(23), n: I::from_u64(11), g: I::from_u64(2) }
    }

    pub fn field(&self) -> ModRing<I> {
        ModRing::new(self.q.clone())
    }

    pub fn element(&self, v: I) -> Result<GroupElement<I>> {
        let e = GroupElement(v);
        if self.contains(&e) {
            Ok(e)
        } else {
            Err(Error::Domain(format!("{} is not in the order-{} subgroup", e.0.to_hex(), self.n.to_hex())))
        }
    }
}

impl<I: Natural> PrimeOrderGroup for GroupParams<I> {
    type Int = I;
    type Element = GroupElement<I>;

    fn order(&self) -> &I {
        &self.n
    }
    fn generator(&self) -> GroupElement<I> {
        GroupElement(self.g.clone())
    }
    fn identity(&self) -> GroupElement<I> {
        GroupElement(I::one())
    }
    fn op(&self, a: &GroupElement<I>, b: &GroupElement<I>) -> GroupElement<I> {
        GroupElement(a.0.mul_mod(&b.0, &self.q))
    }
    fn exp(&self, base: &GroupElement<I>, s: &I) -> GroupElement<I> {
        let s = s.clone() % self.n.clone();
        GroupElement(base.0.pow_mod(&s, &self.q))
    }
    fn contains(&self, e: &GroupElement<I>) -> bool {
        !e.0.is_zero() && e.0 < self.q && e.0.pow_mod(&self.n, &self.q).is_one()
    }
    fn encode(&self, e: &GroupElement<I>) -> Vec<u8> {
        e.0.to_bytes_be()
    }
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({"type": "prime-field-subgroup", "q": self.q.to_hex(), "n": self.n.to_hex(), "g": self.g.to_hex()})
    }
}

/// Generate a subgroup with a `bits`-bit field prime.
///
/// Up to 160 bits q is a safe prime 2n+1; above that n has 256 bits (or
/// half of `bits`, whichever is smaller) and q = 2mn+1.
pub fn gen_group<I: Natural, R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<GroupParams<I>> {
    if bits < 5 {
        return Err(Error::ParameterGeneration("field size below 5 bits".into()));
    }
    let two = I::from_u64(2);
    let bound = 100_000;
    if bits <= 160 {
        for _ in 0..bound {
            let n: I = random_prime(bits - 1, rng)?;
            let q = two.clone() * n.clone() + I::one();
            if q.bits() == bits && is_probable_prime(&q, 24, rng) {
                return finish(q, n);
            }
        }
    } else {
        let n_bits = (bits / 2).min(256);
        let n: I = random_prime(n_bits, rng)?;
        for _ in 0..bound {
            let m: I = I::random_bits(bits - n_bits - 1, rng);
            let q = two.clone() * m * n.clone() + I::one();
            if q.bits() == bits && is_probable_prime(&q, 24, rng) {
                return finish(q, n);
            }
        }
    }
    Err(Error::ParameterGeneration(format!("no {bits}-bit group within {bound} candidates")))
}

fn finish<I: Natural>(q: I, n: I) -> Result<GroupParams<I>> {
    // Prefer the smallest h that already lies in the subgroup (safe primes
    // always have one among the quadratic residues), else project h.
    let mut h = I::from_u64(2);
    for _ in 0..64 {
        if h.pow_mod(&n, &q).is_one() {
            return GroupParams::new(q, n, h);
        }
        h = h + I::one();
    }
    let cofactor = (q.clone() - I::one()).div_floor(&n);
    let mut h = I::from_u64(2);
    loop {
        let g = h.pow_mod(&cofactor, &q);
        if !g.is_one() {
            return GroupParams::new(q, n, g);
        }
        h = h + I::one();
    }
}

/// RFC 5114 1024-bit MODP group with 160-bit prime order subgroup.
pub fn rfc5114_1024_160<I: Natural>() -> GroupParams<I> {
    GroupParams {
        q: hexconst("b10b8f96a080e01dde92de5eae5d54ec52c99fbcfb06a3c69a6a9dca52d23b616073e28675a23d189838ef1e2ee652c013ecb4aea906112324975c3cd49b83bfaccbdd7d90c4bd7098488e9c219a73724effd6fae5644738faa31a4ff55bccc0a151af5f0dc8b4bd45bf37df365c1a65e68cfda76d4da708df1fb2bc2e4a4371"),
        n: hexconst("f518aa8781a8df278aba4e7d64b7cb9d49462353"),
        g: hexconst("a4d1cbd5c3fd34126765a442efb99905f8104dd258ac507fd6406cff14266d31266fea1e5c41564b777e690f5504f213160217b4b01b886a5e91547f9e2749f4d7fbd7d3b9a92ee1909d0d2263f80a76a6a24c087a091f531dbf0a0169b6a28ad662a4d18e73afa32d779d5918d08bc8858f4dcef97c2a24855e6eeb22b3b2e5"),
    }
}

/// RFC 5114 2048-bit MODP group with 256-bit prime order subgroup.
pub fn rfc5114_2048_256<I: Natural>() -> GroupParams<I> {
    GroupParams {
        q: hexconst("87a8e61db4b6663cffbbd19c651959998ceef608660dd0f25d2ceed4435e3b00e00df8f1d61957d4faf7df4561b2aa3016c3d91134096faa3bf4296d830e9a7c209e0c6497517abd5a8a9d306bcf67ed91f9e6725b4758c022e0b1ef4275bf7b6c5bfc11d45f9088b941f54eb1e59bb8bc39a0bf12307f5c4fdb70c581b23f76b63acae1caa6b7902d52526735488a0ef13c6d9a51bfa4ab3ad8347796524d8ef6a167b5a41825d967e144e5140564251ccacb83e6b486f6b3ca3f7971506026c0b857f689962856ded4010abd0be621c3a3960a54e710c375f26375d7014103a4b54330c198af126116d2276e11715f693877fad7ef09cadb094ae91e1a1597"),
        n: hexconst("8cf83642a709a097b447997640129da299b1a47d1eb3750ba308b0fe64f5fbd3"),
        g: hexconst("3fb32c9b73134d0b2e77506660edbd484ca7b18f21ef205407f4793a1a0ba12510dbc15077be463fff4fed4aac0bb555be3a6c1b0c6b47b1bc3773bf7e8c6f62901228f8c28cbb18a55ae31341000a650196f931c77a57f2ddf463e5e9ec144b777de62aaab8a8628ac376d282d6ed3864e67982428ebc831d14348f6f2f9193b5045af2767164e1dfc967c1fb3f2e55a4bd1bffe83b9c80d052b985d182ea0adb2a3b7313d3fe14c8484b1e052588b9b7d2bbd2df016199ecd06e1557cd0915b3353bbb64e0ec377fd028370df92b52c7891428cdc67eb6184b523d1db246c32f63078490f00ef8d647d148d47954515e2327cfef98c582664b4c0f6cc41659"),
    }
}

pub(crate) fn hexconst<I: Natural>(s: &str) -> I {
    I::from_hex(s).expect("constant fits the carrier")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn desk_group_from_generation() {
        for seed in 0..8 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let g: GroupParams<u64> = gen_group(5, &mut rng).unwrap();
            assert_eq!(g, GroupParams::desk());
        }
        // Powers of 2 mod 23: 2 has order exactly 11.
        let powers: Vec<u64> = (0..12).map(|i| 2u64.pow_mod(&i, &23)).collect();
        assert_eq!(powers, [1, 2, 4, 8, 16, 9, 18, 13, 3, 6, 12, 1]);
    }

    #[test]
    fn exp_examples() {
        let g = GroupParams::<u64>::desk();
        let x = g.element(8).unwrap();
        assert_eq!(g.exp(&x, &5), GroupElement(16));
        assert_eq!(g.exp(&x, &1), x);
        assert_eq!(g.exp(&x, &11), g.identity());
        assert!(g.element(5).is_err());
    }

    #[test]
    fn generated_groups_are_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let g: GroupParams<u64> = gen_group(64, &mut rng).unwrap();
        assert_eq!(Natural::bits(&g.q), 64);
        assert!(is_probable_prime(&g.n, 32, &mut rng));
        assert!(g.g.pow_mod(&g.n, &g.q).is_one());
        let big: GroupParams<BigUint> = gen_group(256, &mut rng).unwrap();
        assert_eq!(Natural::bits(&big.q), 256);
        assert!(GroupParams::new(big.q.clone(), big.n.clone(), big.g.clone()).is_ok());
    }

    #[test]
    fn named_groups_validate() {
        for g in [rfc5114_1024_160::<BigUint>(), rfc5114_2048_256::<BigUint>()] {
            assert!(GroupParams::new(g.q.clone(), g.n.clone(), g.g.clone()).is_ok());
        }
    }

    #[test]
    fn membership_checked_on_decode() {
        let g = GroupParams::<u64>::desk();
        assert_eq!(g.decode(&serde_json::json!("10")).unwrap(), GroupElement(16));
        assert!(g.decode(&serde_json::json!("5")).is_err());
        assert!(g.decode(&serde_json::json!("0")).is_err());
    }

    proptest! {
        #[test]
        fn exp_composes(r in 1u64..11, s1 in 0u64..11, s2 in 0u64..11) {
            let g = GroupParams::<u64>::desk();
            let x = g.gen_exp(&r);
            prop_assert_eq!(g.exp(&g.exp(&x, &s1), &s2), g.exp(&x, &(s1 * s2 % 11)));
        }

        #[test]
        fn exp_inverts(r in 1u64..11, t in 1u64..11) {
            let g = GroupParams::<u64>::desk();
            let x = g.gen_exp(&r);
            let t_inv = g.scalars().inv(&t).unwrap();
            prop_assert_eq!(g.exp(&g.exp(&x, &t), &t_inv), x);
        }

        #[test]
        fn big_carrier_agrees(r in 1u64..11, s in 0u64..11) {
            let small = GroupParams::<u64>::desk();
            let big = GroupParams::<BigUint>::desk();
            let a = small.exp(&small.gen_exp(&r), &s);
            let b = big.exp(&big.gen_exp(&BigUint::from(r)), &BigUint::from(s));
            prop_assert_eq!(BigUint::from(a.0), b.0);
        }
    }
}
