//! The four-function OPRF abstraction: PR, BL, OPR, UBL with optional ω.

use std::fmt::{self, Debug};
use std::hash::Hash;
use std::str::FromStr;

use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::arith::Natural;
use crate::canon;
use crate::error::{Error, Result};

pub mod dyhe;
pub mod hashdh;
pub mod nrhe;
pub mod rsa;

pub use dyhe::DyHe;
pub use hashdh::HashDh;
pub use nrhe::NrHe;
pub use rsa::TwoHashRsa;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OprfKind {
    HashDh,
    HashEcdh,
    NrHe,
    DyHe,
    TwoHashRsa,
    TwoHashRsaN,
}

impl OprfKind {
    pub const ALL: [OprfKind; 6] =
        [OprfKind::HashDh, OprfKind::HashEcdh, OprfKind::NrHe, OprfKind::DyHe, OprfKind::TwoHashRsa, OprfKind::TwoHashRsaN];

    pub fn name(self) -> &'static str {
        match self {
            OprfKind::HashDh => "HashDH",
            OprfKind::HashEcdh => "HashECDH",
            OprfKind::NrHe => "NR_HE",
            OprfKind::DyHe => "DY_HE",
            OprfKind::TwoHashRsa => "2HashRSA",
            OprfKind::TwoHashRsaN => "2HashRSA_N",
        }
    }

    /// Backends whose accounts are unique, hence usable for full protocol runs.
    pub fn has_account_uniqueness(self) -> bool {
        !matches!(self, OprfKind::NrHe)
    }
}

impl fmt::Display for OprfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OprfKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        OprfKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase().replace('_', "") == norm)
            .ok_or_else(|| Error::Config(format!("unknown backend {s:?}")))
    }
}

impl Serialize for OprfKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for OprfKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyIdentifierFreeness {
    Strong,
    Weak,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendFlags {
    pub has_omega: bool,
    pub omega_needed_by_ubl: bool,
    /// ω is an argument of BL (so it joins the r-tuple under PID_RP checking).
    pub omega_in_bl: bool,
    pub omega_depends_on_k: bool,
    pub key_identifier_freeness: KeyIdentifierFreeness,
    pub deterministic_he_mode: bool,
}

/// One row per kind: has_omega, needed_by_ubl, in_bl, depends_on_k, freeness.
const FLAG_TABLE: [(OprfKind, bool, bool, bool, bool, KeyIdentifierFreeness); 6] = [
    (OprfKind::HashDh, false, false, false, false, KeyIdentifierFreeness::Strong),
    (OprfKind::HashEcdh, false, false, false, false, KeyIdentifierFreeness::Strong),
    (OprfKind::NrHe, true, true, false, true, KeyIdentifierFreeness::Strong),
    (OprfKind::DyHe, true, false, true, true, KeyIdentifierFreeness::Strong),
    (OprfKind::TwoHashRsa, true, false, true, true, KeyIdentifierFreeness::None),
    (OprfKind::TwoHashRsaN, true, false, true, true, KeyIdentifierFreeness::Weak),
];

impl BackendFlags {
    pub fn for_kind(kind: OprfKind, deterministic_he_mode: bool) -> Self {
        let row = FLAG_TABLE.iter().find(|r| r.0 == kind).expect("every kind has a row");
        // A deterministic ω is a key identifier, so strong freeness is lost.
        let kif = if deterministic_he_mode { KeyIdentifierFreeness::None } else { row.5 };
        BackendFlags {
            has_omega: row.1,
            omega_needed_by_ubl: row.2,
            omega_in_bl: row.3,
            omega_depends_on_k: row.4,
            key_identifier_freeness: kif,
            deterministic_he_mode,
        }
    }
}

/// An integer value on the wire: a scalar, an RSA residue or a digest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct Scalar<I: Natural>(#[serde(with = "canon::hex")] pub I);

/// Serializable value bound shared by all wire-visible OPRF types.
/// Enumerations stop above this many elements.
pub const SMALL_SPACE: u64 = 1 << 16;

pub trait Wire: Clone + Debug + PartialEq + Serialize + DeserializeOwned + Send + Sync + 'static {}
impl<T: Clone + Debug + PartialEq + Serialize + DeserializeOwned + Send + Sync + 'static> Wire for T {}

/// An OPRF in the PR/BL/OPR/UBL formalization.
///
/// `Blind` holds every random choice BL makes, so BL is a pure function of
/// `(x, t, ω)`; that is what lets an RP recompute PID_RP when checking.
pub trait Oprf: Send + Sync + 'static {
    type Int: Natural;
    type Key: Clone + Debug + PartialEq + Send + Sync + 'static;
    type Input: Wire + Eq + Hash + Ord;
    type Blinded: Wire;
    type Evaluated: Wire;
    type Output: Wire + Eq + Hash + Ord;
    type Omega: Wire;
    type Blind: Wire;

    fn kind(&self) -> OprfKind;
    fn flags(&self) -> BackendFlags;
    /// Public parameters shared by all keys.
    fn describe(&self) -> serde_json::Value;

    fn random_key<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Self::Key>;
    /// Finite key spaces (RSA exponent pairs) report their size.
    fn key_space(&self) -> Option<usize> {
        None
    }

    // Exhaustive enumerations, offered only on desk-size parameters.

    fn small_keys(&self) -> Option<Vec<Self::Key>> {
        None
    }
    fn small_inputs(&self) -> Option<Vec<Self::Input>> {
        None
    }
    /// The inputs registration can hand out (a subset of `small_inputs`).
    fn small_registrable_inputs(&self) -> Option<Vec<Self::Input>> {
        self.small_inputs()
    }
    /// Every invertible t under `omega`, with fresh auxiliary randomness
    /// where BL has any.
    fn small_blinds<R: RngCore + ?Sized>(&self, omega: Option<&Self::Omega>, rng: &mut R) -> Option<Vec<Self::Blind>> {
        let _ = (omega, rng);
        None
    }
    /// Secret key material, for test escrow only.
    fn key_escrow(&self, key: &Self::Key) -> serde_json::Value;
    /// All encodings of the key that must never leave the IdP.
    fn key_secrets(&self, key: &Self::Key) -> Vec<String>;

    fn random_input<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Input;
    fn validate_input(&self, x: &Self::Input) -> Result<()>;

    fn evaluate(&self, key: &Self::Key, x: &Self::Input) -> Result<Self::Output>;
    fn gen_omega<R: RngCore + ?Sized>(&self, key: &Self::Key, rng: &mut R) -> Result<Self::Omega>;
    fn random_blind<R: RngCore + ?Sized>(&self, omega: Option<&Self::Omega>, rng: &mut R) -> Result<Self::Blind>;
    fn blind_with(&self, x: &Self::Input, t: &Self::Blind, omega: Option<&Self::Omega>) -> Result<Self::Blinded>;
    fn serve(&self, key: &Self::Key, x_prime: &Self::Blinded, omega: Option<&Self::Omega>) -> Result<Self::Evaluated>;
    fn unblind(
        &self,
        z_prime: &Self::Evaluated,
        x: &Self::Input,
        t: &Self::Blind,
        omega: Option<&Self::Omega>,
    ) -> Result<Self::Output>;

    /// Deserialize with domain checks (membership, ranges).
    fn decode_blinded(&self, v: &serde_json::Value) -> Result<Self::Blinded>;
    fn decode_evaluated(&self, v: &serde_json::Value) -> Result<Self::Evaluated>;

    /// Public parameters an RP needs for UBL in this login (e.g. N).
    fn login_public_params(&self, omega: Option<&Self::Omega>) -> serde_json::Value {
        let _ = omega;
        serde_json::Value::Null
    }

    /// Whether the identity token must carry ω.
    fn token_carries_omega(&self, pid_checking: bool) -> bool {
        let f = self.flags();
        f.has_omega && (f.omega_needed_by_ubl || (pid_checking && f.omega_in_bl))
    }

    /// An arbitrary element of the blinded domain, as a malicious user
    /// could submit it in place of a real PID_RP.
    fn random_blinded<R: RngCore + ?Sized>(&self, omega: Option<&Self::Omega>, rng: &mut R) -> Result<Self::Blinded>;

    /// Features an honest-but-curious server can compute from x'. The
    /// default is a coarse digest of the encoding.
    fn server_features(&self, key: &Self::Key, x_prime: &Self::Blinded, rp_inputs: &[Self::Input]) -> Vec<u64> {
        let _ = (key, rp_inputs);
        vec![digest_bucket(&canon::to_value(x_prime), 1 << 16)]
    }

    // Adversarial algebra. Defaults: nothing beyond random and replayed t.

    /// Recompute a BL argument from an RP's view (x, x', t). `known` lists
    /// ω values the adversary already holds.
    fn restore_bl_argument(
        &self,
        x: &Self::Input,
        x_prime: &Self::Blinded,
        t: &Self::Blind,
        known: &[Self::Omega],
    ) -> Option<serde_json::Value> {
        let _ = (x, x_prime, t, known);
        None
    }

    /// Blinding factors algebraically related to `t`.
    fn related_blinds(&self, t: &Self::Blind) -> Vec<Self::Blind> {
        let _ = t;
        Vec::new()
    }

    /// The UBL intermediate an RP computes before hashing (x^k in 2HashRSA).
    fn exposed_intermediate(&self, key: &Self::Key, x: &Self::Input) -> Option<Self::Evaluated> {
        let _ = (key, x);
        None
    }

    /// t' = own * t / target, the forgery enabled by exposed intermediates.
    fn forge_from_intermediates(
        &self,
        t: &Self::Blind,
        own: &Self::Evaluated,
        target: &Self::Evaluated,
        omega: Option<&Self::Omega>,
    ) -> Option<Self::Blind> {
        let _ = (t, own, target, omega);
        None
    }

    /// (PID_RP, t) pairs built from an exposed target intermediate so that
    /// BL(x, t, ω_target) = PID_RP and UBL yields the target account.
    fn unity_forgeries(&self, target: &Self::Evaluated, omega_target: &Self::Omega) -> Vec<(Self::Blinded, Self::Blind)> {
        let _ = (target, omega_target);
        Vec::new()
    }

    /// Solve t^(e_check - e_hat) = x^(k_check * e_hat) / x with a root
    /// oracle; returns (PID_RP, t) on success.
    fn root_oracle_forgery(
        &self,
        x: &Self::Input,
        target: &Self::Evaluated,
        omega_hat: &Self::Omega,
        omega_target: &Self::Omega,
        oracle: &dyn RootOracle,
    ) -> Option<(Self::Blinded, Self::Blind)> {
        let _ = (x, target, omega_hat, omega_target, oracle);
        None
    }
}

/// Test double for an e-th root oracle over Z_N (everything as u64 hex-free
/// integers; only meaningful at desk scale).
pub trait RootOracle: Sync {
    /// Some r with r^exponent = value mod modulus, if the oracle is granted
    /// this exponent and a root exists.
    fn root(
        &self,
        exponent: &num_bigint::BigUint,
        value: &num_bigint::BigUint,
        modulus: &num_bigint::BigUint,
    ) -> Option<num_bigint::BigUint>;
}

/// Brute-force root search, granted only for exponents in a declared set
/// (compared over the integers and modulo phi).
pub struct DeclaredRootOracle {
    pub declared: Vec<u64>,
    pub phi: u64,
}

impl RootOracle for DeclaredRootOracle {
    fn root(
        &self,
        exponent: &num_bigint::BigUint,
        value: &num_bigint::BigUint,
        modulus: &num_bigint::BigUint,
    ) -> Option<num_bigint::BigUint> {
        let e = Natural::to_u64(exponent)?;
        let m = Natural::to_u64(modulus)?;
        let v = Natural::to_u64(value)?;
        let granted = self.declared.iter().any(|d| *d == e || (self.phi > 0 && d % self.phi == e % self.phi));
        if !granted || m > 1 << 24 {
            return None;
        }
        (1..m).filter(|r| num_integer::gcd(*r, m) == 1).find(|r| r.pow_mod(&e, &m) == v).map(num_bigint::BigUint::from)
    }
}

pub fn digest_bucket(v: &serde_json::Value, buckets: u64) -> u64 {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(canon::to_bytes(v));
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes")) % buckets
}

/// Single-use wrapper around a blinding factor.
#[derive(Debug)]
pub struct BlindingState<B: Oprf + ?Sized> {
    t: B::Blind,
    consumed: bool,
}

impl<B: Oprf> BlindingState<B> {
    pub fn fresh<R: RngCore + ?Sized>(backend: &B, omega: Option<&B::Omega>, rng: &mut R) -> Result<Self> {
        Ok(Self { t: backend.random_blind(omega, rng)?, consumed: false })
    }

    pub fn with_blind(t: B::Blind) -> Self {
        Self { t, consumed: false }
    }

    pub fn t(&self) -> &B::Blind {
        &self.t
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// BL with the consumed-flag check.
    pub fn blind(&mut self, backend: &B, x: &B::Input, omega: Option<&B::Omega>) -> Result<B::Blinded> {
        if self.consumed {
            return Err(Error::StateConsumed);
        }
        let out = backend.blind_with(x, &self.t, omega)?;
        self.consumed = true;
        Ok(out)
    }
}

/// What an RP records for one login.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RTuple {
    pub backend: OprfKind,
    pub fields: Vec<RField>,
    /// Public parameters of UBL for this login (e.g. N).
    pub public_params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RField {
    pub name: String,
    pub value: serde_json::Value,
}

impl RTuple {
    pub fn names(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&serde_json::Value> {
        self.fields.iter().find(|f| f.name == name).map(|f| &f.value)
    }
}

/// Build the r-tuple for a login: (x, x', z', t), plus ω when UBL takes it
/// or when PID_RP checking makes it a BL argument the RP sees.
pub fn rtuple_of<B: Oprf>(
    backend: &B,
    x: &B::Input,
    x_prime: &B::Blinded,
    z_prime: &B::Evaluated,
    t: &B::Blind,
    omega: Option<&B::Omega>,
    pid_checking: bool,
) -> RTuple {
    let mut fields = vec![
        RField { name: "x".into(), value: canon::to_value(x) },
        RField { name: "x_prime".into(), value: canon::to_value(x_prime) },
        RField { name: "z_prime".into(), value: canon::to_value(z_prime) },
        RField { name: "t".into(), value: canon::to_value(t) },
    ];
    if let (true, Some(w)) = (backend.token_carries_omega(pid_checking), omega) {
        fields.push(RField { name: "omega".into(), value: canon::to_value(w) });
    }
    RTuple { backend: backend.kind(), fields, public_params: backend.login_public_params(omega) }
}

/// Run BL, OPR, UBL once with fresh randomness.
pub fn round_trip<B: Oprf, R: RngCore + ?Sized>(backend: &B, key: &B::Key, x: &B::Input, rng: &mut R) -> Result<B::Output> {
    let omega = if backend.flags().has_omega { Some(backend.gen_omega(key, rng)?) } else { None };
    let mut state = BlindingState::fresh(backend, omega.as_ref(), rng)?;
    let x_prime = state.blind(backend, x, omega.as_ref())?;
    let z_prime = backend.serve(key, &x_prime, omega.as_ref())?;
    backend.unblind(&z_prime, x, state.t(), omega.as_ref())
}
