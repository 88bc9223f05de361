//! HashDH: z = x^k with multiplicative blinding x' = x^t.
//!
//! Inputs are already group elements (H_1 is the identity map), so the
//! same code serves the field subgroup and the curve (HashECDH).

use num_traits::{One, Zero};
use rand::RngCore;

use super::{BackendFlags, Oprf, OprfKind, Scalar, SMALL_SPACE};
use crate::arith::Natural;
use crate::curve::CurveParams;
use crate::error::{Error, Result};
use crate::group::{GroupParams, PrimeOrderGroup};

/// Which kind name a group backs.
pub trait DhGroup: PrimeOrderGroup {
    const KIND: OprfKind;
}

impl<I: Natural> DhGroup for GroupParams<I> {
    const KIND: OprfKind = OprfKind::HashDh;
}

impl<I: Natural> DhGroup for CurveParams<I> {
    const KIND: OprfKind = OprfKind::HashEcdh;
}

#[derive(Clone, Debug)]
pub struct HashDh<G> {
    pub group: G,
}

impl<G: DhGroup> HashDh<G> {
    pub fn new(group: G) -> Self {
        Self { group }
    }

    fn small_order(&self) -> Option<u64> {
        self.group.order().to_u64().filter(|n| *n <= SMALL_SPACE)
    }

    fn member(&self, e: &G::Element, what: &str) -> Result<()> {
        if !self.group.contains(e) || *e == self.group.identity() {
            return Err(Error::Domain(format!("{what} must be a non-identity subgroup element")));
        }
        Ok(())
    }

    fn unit_scalar(&self, s: &G::Int, what: &str) -> Result<()> {
        if s.is_zero() || s >= self.group.order() {
            return Err(Error::Domain(format!("{what} must lie in [1, n)")));
        }
        Ok(())
    }
}

impl<G: DhGroup> Oprf for HashDh<G> {
    type Int = G::Int;
    type Key = G::Int;
    type Input = G::Element;
    type Blinded = G::Element;
    type Evaluated = G::Element;
    type Output = G::Element;
    type Omega = ();
    type Blind = Scalar<G::Int>;

    fn kind(&self) -> OprfKind {
        G::KIND
    }

    fn flags(&self) -> BackendFlags {
        BackendFlags::for_kind(G::KIND, false)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({"backend": G::KIND, "group": self.group.describe()})
    }

    fn random_key<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<G::Int> {
        Ok(self.group.scalars().random_nonzero(rng))
    }

    fn key_escrow(&self, key: &G::Int) -> serde_json::Value {
        serde_json::json!({"k": key.to_hex()})
    }

    fn key_secrets(&self, key: &G::Int) -> Vec<String> {
        vec![key.to_hex()]
    }

    fn small_keys(&self) -> Option<Vec<G::Int>> {
        Some((1..self.small_order()?).map(G::Int::from_u64).collect())
    }

    fn small_inputs(&self) -> Option<Vec<G::Element>> {
        Some((1..self.small_order()?).map(|i| self.group.gen_exp(&G::Int::from_u64(i))).collect())
    }

    fn small_blinds<R: RngCore + ?Sized>(&self, _omega: Option<&()>, _rng: &mut R) -> Option<Vec<Scalar<G::Int>>> {
        Some((1..self.small_order()?).map(|i| Scalar(G::Int::from_u64(i))).collect())
    }

    fn random_input<R: RngCore + ?Sized>(&self, rng: &mut R) -> G::Element {
        self.group.random_element(rng)
    }

    fn validate_input(&self, x: &G::Element) -> Result<()> {
        self.member(x, "x")
    }

    fn evaluate(&self, key: &G::Int, x: &G::Element) -> Result<G::Element> {
        self.validate_input(x)?;
        Ok(self.group.exp(x, key))
    }

    fn gen_omega<R: RngCore + ?Sized>(&self, _key: &G::Int, _rng: &mut R) -> Result<()> {
        Err(Error::Unsupported(format!("{} has no omega", G::KIND)))
    }

    fn random_blind<R: RngCore + ?Sized>(&self, _omega: Option<&()>, rng: &mut R) -> Result<Scalar<G::Int>> {
        Ok(Scalar(self.group.scalars().random_nonzero(rng)))
    }

    fn blind_with(&self, x: &G::Element, t: &Scalar<G::Int>, _omega: Option<&()>) -> Result<G::Element> {
        self.validate_input(x)?;
        self.unit_scalar(&t.0, "t")?;
        Ok(self.group.exp(x, &t.0))
    }

    fn serve(&self, key: &G::Int, x_prime: &G::Element, _omega: Option<&()>) -> Result<G::Element> {
        self.member(x_prime, "x'")?;
        Ok(self.group.exp(x_prime, key))
    }

    fn unblind(&self, z_prime: &G::Element, _x: &G::Element, t: &Scalar<G::Int>, _omega: Option<&()>) -> Result<G::Element> {
        if !self.group.contains(z_prime) {
            return Err(Error::Domain("z' is not a subgroup element".into()));
        }
        let t_inv = self.group.scalars().inv(&t.0)?;
        Ok(self.group.exp(z_prime, &t_inv))
    }

    fn decode_blinded(&self, v: &serde_json::Value) -> Result<G::Element> {
        self.group.decode(v)
    }

    fn decode_evaluated(&self, v: &serde_json::Value) -> Result<G::Element> {
        self.group.decode(v)
    }

    fn random_blinded<R: RngCore + ?Sized>(&self, _omega: Option<&()>, rng: &mut R) -> Result<G::Element> {
        Ok(self.group.random_element(rng))
    }

    fn related_blinds(&self, t: &Scalar<G::Int>) -> Vec<Scalar<G::Int>> {
        let ring = self.group.scalars();
        let one = G::Int::one();
        let mut out = vec![ring.add(&t.0, &one), ring.mul(&t.0, &t.0), ring.add(&t.0, &t.0)];
        if let Ok(inv) = ring.inv(&t.0) {
            out.push(inv);
        }
        out.retain(|s| !s.is_zero() && *s != t.0);
        out.into_iter().map(Scalar).collect()
    }
}
