//! In-process simulation of the login flows.
//!
//! Parties talk through function calls, which stands in for authenticated
//! and confidential links. A [`Deployment`] holds the IdP (registry, signing
//! key, pending authorization codes) and each RP's local state (synchronized
//! account list, seen nonces).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Mutex;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canon;
use crate::error::{Error, Result};
use crate::idt::{account_status, f_acct, f_pid_rp, f_pid_u, AccountStatus, Registry, RpCertificate, RpHandle, UserHandle};
use crate::oprf::{rtuple_of, BlindingState, Oprf, OprfKind, RTuple};
use crate::sig::{Signature, VerifyingKey};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    #[default]
    Implicit,
    AuthCode,
}

/// Who computes PID_RP. `Rp` is the vulnerable variant in which the RP
/// picks t and hands PID_RP to the user.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PidRpBy {
    #[default]
    User,
    Rp,
}

/// When an RP refreshes its account list from the IdP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountSync {
    /// Before every login.
    #[default]
    Eager,
    /// Only when the derived account is missing from the list.
    Lazy,
    /// Never; the list is whatever was last fetched.
    Off,
}

macro_rules! parse_enum {
    ($t:ty, $($s:literal => $v:expr),+) => {
        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().replace('-', "_").as_str() {
                    $($s => Ok($v),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", stringify!($t), " {:?}"), s))),
                }
            }
        }
    };
}

parse_enum!(Flow, "implicit" => Flow::Implicit, "auth_code" => Flow::AuthCode);
parse_enum!(PidRpBy, "user" => PidRpBy::User, "rp" => PidRpBy::Rp);
parse_enum!(AccountSync, "eager" => AccountSync::Eager, "lazy" => AccountSync::Lazy, "off" => AccountSync::Off);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub flow: Flow,
    pub pid_checking: bool,
    pub pid_rp_computed_by: PidRpBy,
    pub account_sync: AccountSync,
    /// Set by attack games; unlocks the vulnerable PID_RP mode.
    #[serde(default)]
    pub attack_game: bool,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pid_rp_computed_by == PidRpBy::Rp && !self.attack_game {
            return Err(Error::Config("PID_RP computed by the RP is only allowed inside an attack game".into()));
        }
        Ok(())
    }
}

/// TK. Field order is the wire order; the signature covers the canonical
/// encoding of everything before it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityToken {
    pub pid_rp: serde_json::Value,
    pub pid_u: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<serde_json::Value>,
    pub nonce: String,
    pub signature: Signature,
}

#[derive(Serialize)]
struct TokenBody<'a> {
    pid_rp: &'a serde_json::Value,
    pid_u: &'a serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: &'a Option<serde_json::Value>,
    nonce: &'a str,
}

impl IdentityToken {
    fn body(&self) -> Vec<u8> {
        canon::to_bytes(&TokenBody { pid_rp: &self.pid_rp, pid_u: &self.pid_u, omega: &self.omega, nonce: &self.nonce })
    }

    pub fn verify(&self, idp: &VerifyingKey) -> bool {
        idp.verify(&self.body(), &self.signature)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PkceExchange {
    pub verifier: String,
    pub challenge: String,
}

impl PkceExchange {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut raw = [0u8; 32];
        rng.fill_bytes(&mut raw);
        let verifier = URL_SAFE_NO_PAD.encode(raw);
        let challenge = Self::challenge_of(&verifier);
        Self { verifier, challenge }
    }

    /// S256: base64url(SHA-256(verifier)).
    pub fn challenge_of(verifier: &str) -> String {
        URL_SAFE_NO_PAD.encode(Sha256::digest(verifier.as_bytes()))
    }
}

/// Per-epoch bearer credential shared by every registered RP, so the IdP
/// can tell a registered RP is retrieving without learning which one.
#[derive(Clone, PartialEq, Eq)]
pub struct AnonCredential(String);

impl fmt::Debug for AnonCredential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AnonCredential(..)")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Certificate,
    Authorization,
    Delivery,
    Retrieval,
    Signature,
    Replay,
    Token,
    Checking,
    Derivation,
    Account,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub stage: Stage,
    pub reason: String,
}

impl Rejection {
    fn new(stage: Stage, reason: impl Into<String>) -> Self {
        Self { stage, reason: reason.into() }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.stage, self.reason)
    }
}

/// What the IdP observes in one login. Nothing here depends on x, t or Acct.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdpView {
    pub pid_rp: serde_json::Value,
    pub user: UserHandle,
    pub flow_metadata: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: Stage,
    pub event: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoginOutcome {
    pub flow: Flow,
    pub backend: OprfKind,
    pub account: Option<serde_json::Value>,
    pub status: Option<AccountStatus>,
    pub rejection: Option<Rejection>,
    pub rp_view: Option<RTuple>,
    pub idp_view: Option<IdpView>,
    pub transcript: Vec<TranscriptEntry>,
}

impl LoginOutcome {
    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }

    pub fn is_meaningful(&self) -> bool {
        self.status == Some(AccountStatus::Meaningful)
    }
}

/// Deviations a (malicious or buggy) user can introduce into a login.
pub struct UserChoices<B: Oprf> {
    /// t̂ used for BL.
    pub blind: Option<B::Blind>,
    /// ť sent to the RP, when different from t̂.
    pub told_blind: Option<B::Blind>,
    /// PID_RP submitted to the IdP in place of the computed one.
    pub submit_pid_rp: Option<B::Blinded>,
    /// Flip a character of PID_U after signing.
    pub tamper_pid_u: bool,
    /// Deliver the token or code here instead of the certified endpoint.
    pub deliver_to: Option<String>,
}

impl<B: Oprf> Default for UserChoices<B> {
    fn default() -> Self {
        Self { blind: None, told_blind: None, submit_pid_rp: None, tamper_pid_u: false, deliver_to: None }
    }
}

/// Outcome of RP-side token processing.
pub enum RpDecision<B: Oprf> {
    Accepted { account: B::Output, status: AccountStatus, rtuple: RTuple },
    Rejected(Rejection),
}

struct RpState<B: Oprf> {
    accounts: Vec<B::Output>,
    seen_nonces: HashSet<String>,
}

struct PendingCode {
    token: IdentityToken,
    challenge: String,
}

/// An auth-code login stopped after the user delivered the code.
pub struct PendingLogin<B: Oprf> {
    pub user: UserHandle,
    pub rp: RpHandle,
    pub code: String,
    pub pkce: PkceExchange,
    pub told_blind: B::Blind,
    pub omega: Option<B::Omega>,
    pub idp_view: IdpView,
    pub transcript: Vec<TranscriptEntry>,
}

/// Check the certificate and that `target` is its endpoint.
pub fn deliver_token(idp: &VerifyingKey, certificate: &RpCertificate, target: &str) -> std::result::Result<(), Rejection> {
    if !certificate.verify(idp) {
        return Err(Rejection::new(Stage::Certificate, "certificate does not verify"));
    }
    if certificate.endpoint != target {
        return Err(Rejection::new(Stage::Delivery, format!("{target} is not the certified endpoint")));
    }
    Ok(())
}

fn entry(stage: Stage, event: serde_json::Value) -> TranscriptEntry {
    TranscriptEntry { stage, event }
}

fn flip_hex_char(v: &mut serde_json::Value) {
    fn flip(s: &mut String) -> bool {
        let mut chars: Vec<char> = s.chars().collect();
        if let Some(c) = chars.last_mut() {
            *c = if *c == '0' { '1' } else { '0' };
            *s = chars.into_iter().collect();
            return true;
        }
        false
    }
    match v {
        serde_json::Value::String(s) => {
            flip(s);
        }
        serde_json::Value::Array(a) => {
            if let Some(x) = a.first_mut() {
                flip_hex_char(x);
            }
        }
        serde_json::Value::Object(m) => {
            if let Some((_, x)) = m.iter_mut().next() {
                flip_hex_char(x);
            }
        }
        _ => {}
    }
}

pub struct Deployment<B: Oprf> {
    registry: Registry<B>,
    rps: Mutex<HashMap<RpHandle, RpState<B>>>,
    codes: Mutex<HashMap<String, PendingCode>>,
    credential: AnonCredential,
}

impl<B: Oprf> Deployment<B> {
    /// Every RP already in the registry starts with a freshly synchronized list.
    pub fn new<R: RngCore + ?Sized>(registry: Registry<B>, rng: &mut R) -> Result<Self> {
        let credential = AnonCredential(format!("{:032x}", rng.gen::<u128>()));
        let d = Self { registry, rps: Mutex::new(HashMap::new()), codes: Mutex::new(HashMap::new()), credential };
        for rp in d.registry.rps().iter().map(|r| r.handle).collect::<Vec<_>>() {
            d.sync_rp(rp)?;
        }
        Ok(d)
    }

    pub fn registry(&self) -> &Registry<B> {
        &self.registry
    }

    pub fn backend(&self) -> &B {
        self.registry.backend()
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        self.registry.verifying_key()
    }

    /// New users are not pushed to RPs; they appear at the next sync.
    pub fn register_user<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<UserHandle> {
        self.registry.register_user(rng)
    }

    pub fn register_rp<R: RngCore + ?Sized>(&mut self, endpoint: &str, rng: &mut R) -> Result<RpHandle> {
        let (handle, _) = self.registry.register_rp(endpoint, rng)?;
        self.sync_rp(handle)?;
        Ok(handle)
    }

    pub fn sync_rp(&self, rp: RpHandle) -> Result<()> {
        let list = self.registry.synchronize_accounts(rp)?;
        let mut rps = self.rps.lock().expect("rp state lock");
        let state = rps.entry(rp).or_insert_with(|| RpState { accounts: Vec::new(), seen_nonces: HashSet::new() });
        state.accounts = list;
        Ok(())
    }

    pub fn rp_credential(&self, rp: RpHandle) -> Result<AnonCredential> {
        self.registry.rp(rp)?;
        Ok(self.credential.clone())
    }

    // IdP side.

    /// ω for this login, after the IdP authenticates `user`.
    pub fn idp_omega<R: RngCore + ?Sized>(&self, user: UserHandle, rng: &mut R) -> Result<Option<B::Omega>> {
        let b = self.backend();
        if !b.flags().has_omega {
            return Ok(None);
        }
        Ok(Some(b.gen_omega(self.registry.idp_key(user)?, rng)?))
    }

    /// PID_U = OPR(ID_U, PID_RP) and TK. ω goes into TK when UBL needs it or
    /// when the RP checks PID_RP and ω is a BL argument.
    pub fn idp_sign_token<R: RngCore + ?Sized>(
        &self,
        user: UserHandle,
        pid_rp: &B::Blinded,
        omega: Option<&B::Omega>,
        pid_checking: bool,
        rng: &mut R,
    ) -> Result<IdentityToken> {
        let b = self.backend();
        let pid_u = f_pid_u(b, self.registry.idp_key(user)?, pid_rp, omega)?;
        let omega = if b.token_carries_omega(pid_checking) { omega.map(canon::to_value) } else { None };
        let mut token = IdentityToken {
            pid_rp: canon::to_value(pid_rp),
            pid_u: canon::to_value(&pid_u),
            omega,
            nonce: format!("{:032x}", rng.gen::<u128>()),
            signature: crate::sig::Signature { e: Default::default(), s: Default::default() },
        };
        token.signature = self.registry.signer().sign(&token.body(), rng);
        Ok(token)
    }

    /// Park `token` under a fresh one-time code bound to a PKCE challenge.
    pub fn idp_issue_code<R: RngCore + ?Sized>(&self, token: IdentityToken, challenge: &str, rng: &mut R) -> String {
        let code = format!("{:032x}", rng.gen::<u128>());
        self.codes.lock().expect("code lock").insert(code.clone(), PendingCode { token, challenge: challenge.to_string() });
        code
    }

    /// Token endpoint. A code is consumed only by a successful retrieval,
    /// so a failed attempt by an interceptor does not lock out the RP.
    pub fn idp_retrieve_token(
        &self,
        code: &str,
        verifier: Option<&str>,
        credential: Option<&AnonCredential>,
    ) -> std::result::Result<IdentityToken, Rejection> {
        if credential != Some(&self.credential) {
            return Err(Rejection::new(Stage::Retrieval, "retriever is not an authenticated RP"));
        }
        let mut codes = self.codes.lock().expect("code lock");
        let pending = codes.get(code).ok_or_else(|| Rejection::new(Stage::Retrieval, "unknown or already used code"))?;
        match verifier {
            Some(v) if PkceExchange::challenge_of(v) == pending.challenge => {}
            Some(_) => return Err(Rejection::new(Stage::Retrieval, "PKCE verifier does not match")),
            None => return Err(Rejection::new(Stage::Retrieval, "missing PKCE verifier")),
        }
        Ok(codes.remove(code).expect("present").token)
    }

    // RP side.

    pub fn rp_certificate(&self, rp: RpHandle) -> Result<RpCertificate> {
        Ok(self.registry.rp(rp)?.certificate.clone())
    }

    /// Vulnerable mode: the RP picks t and computes PID_RP itself.
    pub fn rp_compute_pid_rp<R: RngCore + ?Sized>(
        &self,
        rp: RpHandle,
        omega: Option<&B::Omega>,
        rng: &mut R,
    ) -> Result<(B::Blinded, B::Blind)> {
        let b = self.backend();
        let x = &self.registry.rp(rp)?.x;
        let mut state = BlindingState::fresh(b, omega, rng)?;
        let pid_rp = f_pid_rp(b, x, &mut state, omega)?;
        Ok((pid_rp, state.t().clone()))
    }

    /// Verify TK, check freshness and (optionally) PID_RP, derive the
    /// account and apply the synchronization policy. `known_omega` is ω
    /// the RP obtained outside the token; the token's ω takes precedence.
    pub fn rp_accept(
        &self,
        rp: RpHandle,
        token: &IdentityToken,
        t: &B::Blind,
        known_omega: Option<&B::Omega>,
        config: &FlowConfig,
    ) -> Result<RpDecision<B>> {
        let b = self.backend();
        let x = &self.registry.rp(rp)?.x;
        let reject = |stage, reason: &str| Ok(RpDecision::Rejected(Rejection::new(stage, reason)));
        if !token.verify(self.verifying_key()) {
            return reject(Stage::Signature, "token signature does not verify");
        }
        let decoded = (|| -> Result<_> {
            let pid_rp = b.decode_blinded(&token.pid_rp)?;
            let pid_u = b.decode_evaluated(&token.pid_u)?;
            let omega = token.omega.as_ref().map(canon::from_value::<B::Omega>).transpose()?;
            Ok((pid_rp, pid_u, omega))
        })();
        let (pid_rp, pid_u, token_omega) = match decoded {
            Ok(v) => v,
            Err(e) => return reject(Stage::Token, &e.to_string()),
        };
        let omega = token_omega.as_ref().or(known_omega);
        if config.pid_checking {
            match b.blind_with(x, t, omega) {
                Ok(expected) if expected == pid_rp => {}
                Ok(_) => return reject(Stage::Checking, "PID_RP in the token does not match BL(ID_RP, t)"),
                Err(e) => return reject(Stage::Checking, &e.to_string()),
            }
        }
        let account = match f_acct(b, &pid_u, x, t, omega) {
            Ok(a) => a,
            Err(e) => return reject(Stage::Derivation, &e.to_string()),
        };
        if matches!(config.account_sync, AccountSync::Eager) {
            self.sync_rp(rp)?;
        }
        let mut rps = self.rps.lock().expect("rp state lock");
        let state = rps.get_mut(&rp).ok_or_else(|| Error::Registry(format!("RP {} has no local state", rp.0)))?;
        if !state.seen_nonces.insert(token.nonce.clone()) {
            return reject(Stage::Replay, "token nonce already seen");
        }
        let mut status = account_status(&state.accounts, &account);
        if status == AccountStatus::Meaningless && config.account_sync == AccountSync::Lazy {
            state.accounts = self.registry.synchronize_accounts(rp)?;
            status = account_status(&state.accounts, &account);
        }
        if status == AccountStatus::Meaningless && config.account_sync != AccountSync::Off {
            return reject(Stage::Account, "derived account is not in the synchronized list");
        }
        let rtuple = rtuple_of(b, x, &pid_rp, &pid_u, t, omega, config.pid_checking);
        Ok(RpDecision::Accepted { account, status, rtuple })
    }

    // User side.

    /// Run one login end to end.
    pub fn login<R: RngCore + ?Sized>(
        &self,
        user: UserHandle,
        rp: RpHandle,
        config: &FlowConfig,
        choices: UserChoices<B>,
        rng: &mut R,
    ) -> Result<LoginOutcome> {
        let mut outcome = LoginOutcome {
            flow: config.flow,
            backend: self.backend().kind(),
            account: None,
            status: None,
            rejection: None,
            rp_view: None,
            idp_view: None,
            transcript: Vec::new(),
        };
        if let Err(e) = config.validate() {
            outcome.rejection = Some(Rejection::new(Stage::Config, e.to_string()));
            return Ok(outcome);
        }
        let (token, t, omega) = match config.flow {
            Flow::Implicit => match self.implicit_front(user, rp, config, choices, rng, &mut outcome)? {
                Some(v) => v,
                None => return Ok(outcome),
            },
            Flow::AuthCode => {
                return Ok(match self.begin_auth_code(user, rp, config, choices, rng)? {
                    Ok(pending) => self.complete_auth_code(pending, config)?,
                    Err((rejection, transcript, idp_view)) => {
                        LoginOutcome { rejection: Some(rejection), transcript, idp_view, ..outcome }
                    }
                });
            }
        };
        self.finish(rp, &token, &t, omega.as_ref(), config, &mut outcome)?;
        Ok(outcome)
    }

    fn finish(
        &self,
        rp: RpHandle,
        token: &IdentityToken,
        t: &B::Blind,
        omega: Option<&B::Omega>,
        config: &FlowConfig,
        outcome: &mut LoginOutcome,
    ) -> Result<()> {
        let known = if config.pid_rp_computed_by == PidRpBy::Rp { omega } else { None };
        match self.rp_accept(rp, token, t, known, config)? {
            RpDecision::Accepted { account, status, rtuple } => {
                outcome.transcript.push(entry(Stage::Account, serde_json::json!({"accepted": true, "status": status})));
                outcome.account = Some(canon::to_value(&account));
                outcome.status = Some(status);
                outcome.rp_view = Some(rtuple);
            }
            RpDecision::Rejected(r) => {
                outcome.transcript.push(entry(r.stage, serde_json::json!({"accepted": false, "reason": r.reason})));
                outcome.rejection = Some(r);
            }
        }
        Ok(())
    }

    /// Shared front half: certificate check, ω, PID_RP, token.
    #[allow(clippy::type_complexity)]
    fn front<R: RngCore + ?Sized>(
        &self,
        user: UserHandle,
        rp: RpHandle,
        config: &FlowConfig,
        choices: &mut UserChoices<B>,
        rng: &mut R,
        transcript: &mut Vec<TranscriptEntry>,
    ) -> Result<std::result::Result<(IdentityToken, B::Blind, Option<B::Omega>, RpCertificate), Rejection>> {
        let b = self.backend();
        let cert = self.rp_certificate(rp)?;
        if !cert.verify(self.verifying_key()) {
            return Ok(Err(Rejection::new(Stage::Certificate, "certificate does not verify")));
        }
        transcript.push(entry(Stage::Certificate, serde_json::json!({"verified": true, "endpoint": cert.endpoint})));
        let x = &self.registry.rp(rp)?.x;
        let omega = self.idp_omega(user, rng)?;
        let (pid_rp, t) = match config.pid_rp_computed_by {
            PidRpBy::Rp => self.rp_compute_pid_rp(rp, omega.as_ref(), rng)?,
            PidRpBy::User => {
                let mut state = match choices.blind.take() {
                    Some(t) => BlindingState::with_blind(t),
                    None => BlindingState::fresh(b, omega.as_ref(), rng)?,
                };
                let pid_rp = f_pid_rp(b, x, &mut state, omega.as_ref())?;
                (pid_rp, state.t().clone())
            }
        };
        let pid_rp = choices.submit_pid_rp.take().unwrap_or(pid_rp);
        let told = choices.told_blind.take().unwrap_or(t);
        let mut token = match self.idp_sign_token(user, &pid_rp, omega.as_ref(), config.pid_checking, rng) {
            Ok(tk) => tk,
            Err(e) => return Ok(Err(Rejection::new(Stage::Authorization, e.to_string()))),
        };
        if choices.tamper_pid_u {
            flip_hex_char(&mut token.pid_u);
        }
        transcript.push(entry(Stage::Authorization, serde_json::json!({"pid_rp_by": config.pid_rp_computed_by, "token": token})));
        Ok(Ok((token, told, omega, cert)))
    }

    fn idp_view(&self, user: UserHandle, token: &IdentityToken, flow: Flow, extra: serde_json::Value) -> IdpView {
        let mut meta = serde_json::json!({"flow": flow, "nonce": token.nonce});
        if let (Some(m), serde_json::Value::Object(e)) = (meta.as_object_mut(), extra) {
            m.extend(e);
        }
        IdpView { pid_rp: token.pid_rp.clone(), user, flow_metadata: meta }
    }

    #[allow(clippy::type_complexity)]
    fn implicit_front<R: RngCore + ?Sized>(
        &self,
        user: UserHandle,
        rp: RpHandle,
        config: &FlowConfig,
        mut choices: UserChoices<B>,
        rng: &mut R,
        outcome: &mut LoginOutcome,
    ) -> Result<Option<(IdentityToken, B::Blind, Option<B::Omega>)>> {
        let (token, t, omega, cert) = match self.front(user, rp, config, &mut choices, rng, &mut outcome.transcript)? {
            Ok(v) => v,
            Err(r) => {
                outcome.rejection = Some(r);
                return Ok(None);
            }
        };
        outcome.idp_view = Some(self.idp_view(user, &token, Flow::Implicit, serde_json::json!({})));
        let target = choices.deliver_to.unwrap_or_else(|| cert.endpoint.clone());
        if let Err(r) = deliver_token(self.verifying_key(), &cert, &target) {
            outcome.transcript.push(entry(r.stage, serde_json::json!({"delivered": false, "target": target})));
            outcome.rejection = Some(r);
            return Ok(None);
        }
        outcome.transcript.push(entry(Stage::Delivery, serde_json::json!({"delivered": true, "target": target})));
        Ok(Some((token, t, omega)))
    }

    /// Auth-code flow up to code delivery: the RP makes a PKCE pair, the
    /// user obtains a code for PID_RP and delivers it to the certified
    /// endpoint. Retrieval is left to the caller.
    #[allow(clippy::type_complexity)]
    pub fn begin_auth_code<R: RngCore + ?Sized>(
        &self,
        user: UserHandle,
        rp: RpHandle,
        config: &FlowConfig,
        mut choices: UserChoices<B>,
        rng: &mut R,
    ) -> Result<std::result::Result<PendingLogin<B>, (Rejection, Vec<TranscriptEntry>, Option<IdpView>)>> {
        if let Err(e) = config.validate() {
            return Ok(Err((Rejection::new(Stage::Config, e.to_string()), Vec::new(), None)));
        }
        let pkce = PkceExchange::generate(rng);
        let mut transcript = vec![entry(Stage::Authorization, serde_json::json!({"pkce_challenge": pkce.challenge}))];
        let (token, t, omega, cert) = match self.front(user, rp, config, &mut choices, rng, &mut transcript)? {
            Ok(v) => v,
            Err(r) => return Ok(Err((r, transcript, None))),
        };
        let view = self.idp_view(user, &token, Flow::AuthCode, serde_json::json!({"pkce_challenge": pkce.challenge}));
        let code = self.idp_issue_code(token, &pkce.challenge, rng);
        let target = choices.deliver_to.unwrap_or_else(|| cert.endpoint.clone());
        if let Err(r) = deliver_token(self.verifying_key(), &cert, &target) {
            transcript.push(entry(r.stage, serde_json::json!({"delivered": false, "target": target})));
            return Ok(Err((r, transcript, Some(view))));
        }
        transcript.push(entry(Stage::Delivery, serde_json::json!({"code_delivered": true, "target": target})));
        Ok(Ok(PendingLogin { user, rp, code, pkce, told_blind: t, omega, idp_view: view, transcript }))
    }

    /// RP side of an auth-code login once it holds the code.
    pub fn complete_auth_code(&self, pending: PendingLogin<B>, config: &FlowConfig) -> Result<LoginOutcome> {
        let mut outcome = LoginOutcome {
            flow: Flow::AuthCode,
            backend: self.backend().kind(),
            account: None,
            status: None,
            rejection: None,
            rp_view: None,
            idp_view: Some(pending.idp_view),
            transcript: pending.transcript,
        };
        let credential = self.rp_credential(pending.rp)?;
        match self.idp_retrieve_token(&pending.code, Some(&pending.pkce.verifier), Some(&credential)) {
            Ok(token) => {
                outcome.transcript.push(entry(Stage::Retrieval, serde_json::json!({"retrieved": true})));
                self.finish(pending.rp, &token, &pending.told_blind, pending.omega.as_ref(), config, &mut outcome)?;
            }
            Err(r) => outcome.rejection = Some(r),
        }
        Ok(outcome)
    }
}
