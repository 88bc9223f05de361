//! Parameter tiers and construction of a backend from a specification.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curve::CurveParams;
use crate::error::{Error, Result};
use crate::group::{gen_group, rfc5114_2048_256, GroupParams};
use crate::oprf::{DyHe, HashDh, NrHe, Oprf, OprfKind, TwoHashRsa};
use crate::paillier::PaillierKeys;
use crate::rsa::{gen_rsa, RsaParams};

/// Parameter sizes.
///
/// `Desk` is small enough for exhaustive oracles (order-11 group, N = 35),
/// `Lab` is large enough that guessing a blinding factor is hopeless yet
/// fast enough for 10^4-trial games, and `Full` is production size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Desk,
    Lab,
    Full,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Desk => "desk",
            Tier::Lab => "lab",
            Tier::Full => "full",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Tier::Desk),
            "lab" => Ok(Tier::Lab),
            "full" => Ok(Tier::Full),
            _ => Err(Error::Config(format!("unknown tier {s:?} (expected desk, lab or full)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub kind: OprfKind,
    pub tier: Tier,
    pub seed: u64,
    #[serde(default)]
    pub deterministic_he: bool,
    /// Exponent pairs on the shared modulus, or moduli for 2HashRSA.
    /// Desk RSA sets are fixed and ignore this.
    #[serde(default = "default_key_count")]
    pub key_count: usize,
    #[serde(default = "default_true")]
    pub reject_unity_blinded: bool,
}

fn default_key_count() -> usize {
    8
}

fn default_true() -> bool {
    true
}

impl BackendSpec {
    pub fn new(kind: OprfKind, tier: Tier, seed: u64) -> Self {
        Self { kind, tier, seed, deterministic_he: false, key_count: default_key_count(), reject_unity_blinded: true }
    }

    pub fn deterministic(mut self, on: bool) -> Self {
        self.deterministic_he = on;
        self
    }

    pub fn keys(mut self, count: usize) -> Self {
        self.key_count = count;
        self
    }

    pub fn unity_filter(mut self, on: bool) -> Self {
        self.reject_unity_blinded = on;
        self
    }
}

/// Independent generator for `(seed, label, index)`.
pub fn derive_rng(seed: u64, label: &str, index: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update((label.len() as u64).to_be_bytes());
    h.update(label.as_bytes());
    h.update(index.to_be_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Receives the constructed backend, whatever its concrete type.
pub trait BackendVisitor {
    type Output;
    fn visit<B: Oprf>(self, backend: B) -> Self::Output;
}

/// Build the backend `spec` describes and hand it to `visitor`.
pub fn with_backend<V: BackendVisitor>(spec: &BackendSpec, visitor: V) -> Result<V::Output> {
    let mut rng = derive_rng(spec.seed, "params", 0);
    let rng = &mut rng;
    if spec.deterministic_he && spec.kind != OprfKind::DyHe {
        return Err(Error::Config("deterministic HE applies to DY_HE only".into()));
    }
    if spec.key_count == 0 {
        return Err(Error::Config("key_count must be at least 1".into()));
    }
    let filter = |b: TwoHashRsa<u64>| unity_filter(b, spec.reject_unity_blinded);
    let filter_wide = |b: TwoHashRsa<BigUint>| unity_filter(b, spec.reject_unity_blinded);
    Ok(match (spec.tier, spec.kind) {
        (Tier::Desk, OprfKind::HashDh) => visitor.visit(HashDh::new(GroupParams::<u64>::desk())),
        (Tier::Desk, OprfKind::HashEcdh) => visitor.visit(HashDh::new(CurveParams::<u64>::desk())),
        (Tier::Desk, OprfKind::NrHe) => visitor.visit(NrHe::new(GroupParams::<u64>::desk(), 2, 20)?),
        (Tier::Desk, OprfKind::DyHe) => {
            visitor.visit(DyHe::new(GroupParams::<u64>::desk(), PaillierKeys::desk(), spec.deterministic_he)?)
        }
        (Tier::Desk, OprfKind::TwoHashRsa) => visitor.visit(filter(TwoHashRsa::distinct(RsaParams::<u64>::desk_distinct())?)),
        (Tier::Desk, OprfKind::TwoHashRsaN) => visitor.visit(filter(TwoHashRsa::shared(RsaParams::<u64>::desk()))),
        (tier, kind) => {
            let (group, he_bits, nr_len, rsa_bits) = match tier {
                Tier::Lab => (gen_group::<BigUint, _>(64, rng)?, 192, 8, 128),
                _ => (rfc5114_2048_256::<BigUint>(), 2048, 16, 2048),
            };
            match kind {
                OprfKind::HashDh => visitor.visit(HashDh::new(group)),
                OprfKind::HashEcdh => visitor.visit(HashDh::new(CurveParams::<BigUint>::p256())),
                OprfKind::NrHe => {
                    let ephemeral = 2 * group.n.bits() + 32;
                    visitor.visit(NrHe::new(group, nr_len, ephemeral)?)
                }
                OprfKind::DyHe => {
                    let he = PaillierKeys::generate(he_bits, rng)?;
                    visitor.visit(DyHe::new(group, he, spec.deterministic_he)?)
                }
                OprfKind::TwoHashRsa => {
                    let moduli = (0..spec.key_count).map(|_| gen_rsa(rsa_bits, 1, true, rng)).collect::<Result<Vec<_>>>()?;
                    visitor.visit(filter_wide(TwoHashRsa::distinct(moduli)?))
                }
                OprfKind::TwoHashRsaN => {
                    visitor.visit(filter_wide(TwoHashRsa::shared(gen_rsa(rsa_bits, spec.key_count, true, rng)?)))
                }
            }
        }
    })
}

fn unity_filter<I: crate::arith::Natural>(b: TwoHashRsa<I>, on: bool) -> TwoHashRsa<I> {
    if on {
        b
    } else {
        b.literal()
    }
}

/// The public parameters of a backend as a document.
pub struct Describe;

impl BackendVisitor for Describe {
    type Output = serde_json::Value;
    fn visit<B: Oprf>(self, backend: B) -> serde_json::Value {
        backend.describe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_names() {
        assert_eq!("DESK".parse::<Tier>().unwrap(), Tier::Desk);
        assert!("huge".parse::<Tier>().is_err());
    }

    #[test]
    fn desk_descriptions() {
        let d = with_backend(&BackendSpec::new(OprfKind::HashDh, Tier::Desk, 0), Describe).unwrap();
        assert_eq!(d["group"], serde_json::json!({"type": "prime-field-subgroup", "q": "17", "n": "b", "g": "2"}));
        let d = with_backend(&BackendSpec::new(OprfKind::TwoHashRsaN, Tier::Desk, 0), Describe).unwrap();
        assert_eq!(d["moduli"], serde_json::json!(["23"]));
    }

    #[test]
    fn lab_parameters_are_seeded() {
        let spec = BackendSpec::new(OprfKind::TwoHashRsaN, Tier::Lab, 9).keys(4);
        let a = with_backend(&spec, Describe).unwrap();
        assert_eq!(a, with_backend(&spec, Describe).unwrap());
        assert_ne!(a, with_backend(&BackendSpec { seed: 10, ..spec }, Describe).unwrap());
    }

    #[test]
    fn deterministic_flag_only_for_dy_he() {
        let spec = BackendSpec::new(OprfKind::HashDh, Tier::Desk, 0).deterministic(true);
        assert!(with_backend(&spec, Describe).is_err());
    }
}
