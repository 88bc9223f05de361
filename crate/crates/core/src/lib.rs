//! Identity-transformation single sign-on over pluggable OPRF backends.
//!
//! The IdP evaluates an OPRF on blinded RP identities, so it signs tokens
//! without learning which RP a user visits, and each RP derives a stable
//! per-user account that other RPs cannot link. [`games`] checks those
//! claims empirically for every backend.

pub mod arith;
pub mod canon;
pub mod curve;
pub mod error;
pub mod games;
pub mod group;
pub mod hash;
pub mod idt;
pub mod oprf;
pub mod paillier;
pub mod params;
pub mod protocol;
pub mod rsa;
pub mod sig;

pub use error::{Error, Result};

use curve::CurveParams;
use group::GroupParams;
use num_bigint::BigUint;

/// Backends on u64 carriers (desk tier).
pub type DeskHashDh = oprf::HashDh<GroupParams<u64>>;
pub type DeskHashEcdh = oprf::HashDh<CurveParams<u64>>;
pub type DeskNrHe = oprf::NrHe<u64>;
pub type DeskDyHe = oprf::DyHe<u64>;
pub type DeskRsa = oprf::TwoHashRsa<u64>;

/// Backends on big-integer carriers (lab and full tiers).
pub type WideHashDh = oprf::HashDh<GroupParams<BigUint>>;
pub type WideHashEcdh = oprf::HashDh<CurveParams<BigUint>>;
pub type WideNrHe = oprf::NrHe<BigUint>;
pub type WideDyHe = oprf::DyHe<BigUint>;
pub type WideRsa = oprf::TwoHashRsa<BigUint>;
