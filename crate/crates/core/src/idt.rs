//! Identity transformations on top of an OPRF: registration, the account
//! table and account synchronization.
//!
//! ID_U is the user's OPRF key and ID_RP the RP's OPRF input, so
//! Acct = PR(ID_U, ID_RP), PID_RP = BL, PID_U = OPR and F_Acct = UBL.

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::canon;
use crate::error::{Error, Result};
use crate::oprf::{BlindingState, Oprf, OprfKind};
use crate::sig::{Signature, SigningKey, VerifyingKey};

/// Attempts before registration gives up on a collision-free choice.
pub const REGISTRATION_ATTEMPTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserHandle(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RpHandle(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountStatus {
    Meaningful,
    Meaningless,
}

/// IdP signature over (ID_RP, endpoint).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpCertificate {
    pub id_rp: serde_json::Value,
    pub endpoint: String,
    pub signature: Signature,
}

impl RpCertificate {
    fn payload(id_rp: &serde_json::Value, endpoint: &str) -> Vec<u8> {
        canon::to_bytes(&serde_json::json!({"id_rp": id_rp, "endpoint": endpoint}))
    }

    pub fn verify(&self, idp: &VerifyingKey) -> bool {
        idp.verify(&Self::payload(&self.id_rp, &self.endpoint), &self.signature)
    }
}

#[derive(Clone, Debug)]
pub struct RegisteredRp<B: Oprf> {
    pub handle: RpHandle,
    pub x: B::Input,
    pub endpoint: String,
    pub certificate: RpCertificate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryOptions {
    /// Admit backends without account uniqueness (NR_HE).
    pub unsafe_backend: bool,
}

/// The IdP's registration state. Keys never leave it except through
/// [`Registry::idp_key`], which models the IdP authenticating a user.
pub struct Registry<B: Oprf> {
    backend: Arc<B>,
    signer: SigningKey,
    users: Vec<(UserHandle, B::Key)>,
    rps: Vec<RegisteredRp<B>>,
    /// accounts[i][j] = PR(k_i, x_j).
    accounts: Vec<Vec<B::Output>>,
}

impl<B: Oprf> Registry<B> {
    pub fn new(backend: Arc<B>, signer: SigningKey, options: RegistryOptions) -> Result<Self> {
        if !backend.kind().has_account_uniqueness() && !options.unsafe_backend {
            return Err(Error::Config(format!("{} lacks account uniqueness; pass the unsafe-backend flag", backend.kind())));
        }
        Ok(Self { backend, signer, users: Vec::new(), rps: Vec::new(), accounts: Vec::new() })
    }

    pub fn backend(&self) -> &Arc<B> {
        &self.backend
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        self.signer.verifying_key()
    }

    pub(crate) fn signer(&self) -> &SigningKey {
        &self.signer
    }

    pub fn users(&self) -> Vec<UserHandle> {
        self.users.iter().map(|(h, _)| *h).collect()
    }

    pub fn rps(&self) -> &[RegisteredRp<B>] {
        &self.rps
    }

    pub fn rp(&self, handle: RpHandle) -> Result<&RegisteredRp<B>> {
        self.rps.iter().find(|r| r.handle == handle).ok_or_else(|| Error::Registry(format!("unknown RP {}", handle.0)))
    }

    fn user_index(&self, user: UserHandle) -> Result<usize> {
        self.users.iter().position(|(h, _)| *h == user).ok_or_else(|| Error::Registry(format!("unknown user {}", user.0)))
    }

    fn rp_index(&self, rp: RpHandle) -> Result<usize> {
        self.rps.iter().position(|r| r.handle == rp).ok_or_else(|| Error::Registry(format!("unknown RP {}", rp.0)))
    }

    /// ID_U of an authenticated user; IdP-internal.
    pub fn idp_key(&self, user: UserHandle) -> Result<&B::Key> {
        Ok(&self.users[self.user_index(user)?].1)
    }

    /// Acct[user][rp] from the table.
    pub fn account(&self, user: UserHandle, rp: RpHandle) -> Result<&B::Output> {
        Ok(&self.accounts[self.user_index(user)?][self.rp_index(rp)?])
    }

    /// The user (if any) owning `account` at `rp`.
    pub fn owner_of(&self, rp: RpHandle, account: &B::Output) -> Option<UserHandle> {
        let j = self.rp_index(rp).ok()?;
        self.accounts.iter().position(|row| row[j] == *account).map(|i| self.users[i].0)
    }

    pub fn register_user<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<UserHandle> {
        for _ in 0..REGISTRATION_ATTEMPTS {
            let key = self.backend.random_key(rng)?;
            if let Ok(h) = self.register_user_with_key(key) {
                return Ok(h);
            }
        }
        Err(Error::Registry(format!("no collision-free user key in {REGISTRATION_ATTEMPTS} attempts")))
    }

    /// Register a chosen key; fails on a duplicate key, a degenerate
    /// (key, input) pair or an account collision.
    pub fn register_user_with_key(&mut self, key: B::Key) -> Result<UserHandle> {
        if self.users.iter().any(|(_, k)| *k == key) {
            return Err(Error::Registry("duplicate user key".into()));
        }
        let row = self.rps.iter().map(|rp| self.backend.evaluate(&key, &rp.x)).collect::<Result<Vec<_>>>()?;
        for (j, acct) in row.iter().enumerate() {
            if self.accounts.iter().any(|r| r[j] == *acct) {
                return Err(Error::Registry("account collision".into()));
            }
        }
        let handle = UserHandle(self.users.len() as u32);
        self.users.push((handle, key));
        self.accounts.push(row);
        Ok(handle)
    }

    pub fn register_rp<R: RngCore + ?Sized>(&mut self, endpoint: &str, rng: &mut R) -> Result<(RpHandle, RpCertificate)> {
        for _ in 0..REGISTRATION_ATTEMPTS {
            let x = self.backend.random_input(rng);
            if let Ok(out) = self.register_rp_with_input(x, endpoint, rng) {
                return Ok(out);
            }
        }
        Err(Error::Registry(format!("no collision-free RP input in {REGISTRATION_ATTEMPTS} attempts")))
    }

    pub fn register_rp_with_input<R: RngCore + ?Sized>(
        &mut self,
        x: B::Input,
        endpoint: &str,
        rng: &mut R,
    ) -> Result<(RpHandle, RpCertificate)> {
        self.backend.validate_input(&x)?;
        if self.rps.iter().any(|r| r.x == x) {
            return Err(Error::Registry("duplicate RP input".into()));
        }
        let column = self.users.iter().map(|(_, k)| self.backend.evaluate(k, &x)).collect::<Result<Vec<_>>>()?;
        let mut sorted = column.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != column.len() {
            return Err(Error::Registry("account collision".into()));
        }
        let id_rp = canon::to_value(&x);
        let signature = self.signer.sign(&RpCertificate::payload(&id_rp, endpoint), rng);
        let certificate = RpCertificate { id_rp, endpoint: endpoint.to_string(), signature };
        let handle = RpHandle(self.rps.len() as u32);
        self.rps.push(RegisteredRp { handle, x, endpoint: endpoint.to_string(), certificate: certificate.clone() });
        for (row, acct) in self.accounts.iter_mut().zip(column) {
            row.push(acct);
        }
        Ok((handle, certificate))
    }

    /// The RP's current account list, sorted so that it carries no user order.
    pub fn synchronize_accounts(&self, rp: RpHandle) -> Result<Vec<B::Output>> {
        let j = self.rp_index(rp)?;
        let mut list: Vec<B::Output> = self.accounts.iter().map(|row| row[j].clone()).collect();
        list.sort();
        Ok(list)
    }

    /// Public registry document. Key material appears only with `escrow`.
    pub fn export(&self, escrow: bool) -> serde_json::Value {
        let rps: Vec<_> = self
            .rps
            .iter()
            .map(|r| serde_json::json!({"handle": r.handle, "id_rp": r.certificate.id_rp, "endpoint": r.endpoint, "certificate": r.certificate}))
            .collect();
        let accounts: Vec<_> = self
            .rps
            .iter()
            .map(|r| {
                let list = self.synchronize_accounts(r.handle).unwrap_or_default();
                serde_json::json!({"rp": r.handle, "accounts": list.iter().map(canon::to_value).collect::<Vec<_>>()})
            })
            .collect();
        let mut doc = serde_json::json!({
            "backend": self.backend.describe(),
            "verifying_key": self.verifying_key(),
            "users": self.users.len(),
            "rps": rps,
            "accounts": accounts,
        });
        if escrow {
            doc["escrow"] =
                self.users.iter().map(|(h, k)| serde_json::json!({"user": h, "key": self.backend.key_escrow(k)})).collect();
        }
        doc
    }

    pub fn kind(&self) -> OprfKind {
        self.backend.kind()
    }
}

pub fn account_status<O: Ord>(list: &[O], account: &O) -> AccountStatus {
    if list.binary_search(account).is_ok() {
        AccountStatus::Meaningful
    } else {
        AccountStatus::Meaningless
    }
}

/// F_PID_RP = BL.
pub fn f_pid_rp<B: Oprf>(b: &B, id_rp: &B::Input, state: &mut BlindingState<B>, omega: Option<&B::Omega>) -> Result<B::Blinded> {
    state.blind(b, id_rp, omega)
}

/// F_PID_U = OPR.
pub fn f_pid_u<B: Oprf>(b: &B, id_u: &B::Key, pid_rp: &B::Blinded, omega: Option<&B::Omega>) -> Result<B::Evaluated> {
    b.serve(id_u, pid_rp, omega)
}

/// F_Acct = UBL.
pub fn f_acct<B: Oprf>(
    b: &B,
    pid_u: &B::Evaluated,
    id_rp: &B::Input,
    t: &B::Blind,
    omega: Option<&B::Omega>,
) -> Result<B::Output> {
    b.unblind(pid_u, id_rp, t, omega)
}

/// F_Acct* = PR.
pub fn f_acct_star<B: Oprf>(b: &B, id_u: &B::Key, id_rp: &B::Input) -> Result<B::Output> {
    b.evaluate(id_u, id_rp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupElement, GroupParams};
    use crate::oprf::{HashDh, NrHe, Scalar};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    type Desk = HashDh<GroupParams<u64>>;

    fn desk_registry(rng: &mut ChaCha20Rng) -> Registry<Desk> {
        let b = Arc::new(HashDh::new(GroupParams::desk()));
        Registry::new(b, SigningKey::generate(rng), RegistryOptions::default()).unwrap()
    }

    #[test]
    fn account_table_entries() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut reg = desk_registry(&mut rng);
        let u = reg.register_user_with_key(5).unwrap();
        assert!(reg.accounts[0].is_empty());
        let (rp, cert) = reg.register_rp_with_input(GroupElement(8), "https://rp.example/cb", &mut rng).unwrap();
        assert_eq!(*reg.account(u, rp).unwrap(), GroupElement(16));
        assert_eq!(cert.id_rp, serde_json::json!("8"));
        assert!(cert.verify(reg.verifying_key()));
        let mut forged = cert.clone();
        forged.endpoint = "https://evil.example/cb".into();
        assert!(!forged.verify(reg.verifying_key()));
        assert!(reg.register_user_with_key(5).is_err());
    }

    #[test]
    fn transformations_compose_to_the_table() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut reg = desk_registry(&mut rng);
        let u = reg.register_user_with_key(5).unwrap();
        let (rp, _) = reg.register_rp_with_input(GroupElement(8), "https://rp.example/cb", &mut rng).unwrap();
        let b = reg.backend().clone();
        let mut st = BlindingState::with_blind(Scalar(3));
        let pid_rp = f_pid_rp(&*b, &GroupElement(8), &mut st, None).unwrap();
        assert_eq!(pid_rp, GroupElement(6));
        let pid_u = f_pid_u(&*b, reg.idp_key(u).unwrap(), &pid_rp, None).unwrap();
        assert_eq!(pid_u, GroupElement(2));
        assert_eq!(f_acct(&*b, &pid_u, &GroupElement(8), &Scalar(3), None).unwrap(), GroupElement(16));
        assert_eq!(f_acct_star(&*b, &5, &GroupElement(8)).unwrap(), GroupElement(16));
        // Unblinding with a different t gives an account nobody owns.
        let wrong = f_acct(&*b, &pid_u, &GroupElement(8), &Scalar(2), None).unwrap();
        assert!(reg.owner_of(rp, &wrong).is_none());
        // t = 1 leaves ID_RP as PID_RP.
        let mut id = BlindingState::with_blind(Scalar(1));
        assert_eq!(f_pid_rp(&*b, &GroupElement(8), &mut id, None).unwrap(), GroupElement(8));
    }

    #[test]
    fn synchronization_is_monotone() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut reg = desk_registry(&mut rng);
        reg.register_user(&mut rng).unwrap();
        let (rp, _) = reg.register_rp("https://rp.example/cb", &mut rng).unwrap();
        let first = reg.synchronize_accounts(rp).unwrap();
        assert_eq!(first, reg.synchronize_accounts(rp).unwrap());
        let newcomer = reg.register_user(&mut rng).unwrap();
        let acct = reg.account(newcomer, rp).unwrap().clone();
        assert_eq!(account_status(&first, &acct), AccountStatus::Meaningless);
        let second = reg.synchronize_accounts(rp).unwrap();
        assert!(first.iter().all(|a| second.contains(a)));
        assert_eq!(account_status(&second, &acct), AccountStatus::Meaningful);
        assert!(reg.synchronize_accounts(RpHandle(9)).is_err());
    }

    #[test]
    fn nr_he_needs_unsafe_flag() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let b = Arc::new(NrHe::new(GroupParams::<u64>::desk(), 2, 20).unwrap());
        assert!(Registry::new(b.clone(), SigningKey::generate(&mut rng), RegistryOptions::default()).is_err());
        assert!(Registry::new(b, SigningKey::generate(&mut rng), RegistryOptions { unsafe_backend: true }).is_ok());
    }

    #[test]
    fn export_hides_keys_unless_escrowed() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let b = Arc::new(HashDh::new(crate::group::gen_group::<num_bigint::BigUint, _>(64, &mut rng).unwrap()));
        let mut reg = Registry::new(b.clone(), SigningKey::generate(&mut rng), RegistryOptions::default()).unwrap();
        for i in 0..4 {
            reg.register_user(&mut rng).unwrap();
            reg.register_rp(&format!("https://rp{i}.example/cb"), &mut rng).unwrap();
        }
        let public = canon::to_bytes(&reg.export(false));
        let public = String::from_utf8(public).unwrap();
        let secrets: Vec<String> = reg.users().iter().flat_map(|u| b.key_secrets(reg.idp_key(*u).unwrap())).collect();
        assert!(secrets.iter().all(|s| !public.contains(s.as_str())));
        let escrowed = String::from_utf8(canon::to_bytes(&reg.export(true))).unwrap();
        assert!(secrets.iter().all(|s| escrowed.contains(s.as_str())));
    }

    #[test]
    fn leaked_keys_link_accounts_across_rps() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut reg = desk_registry(&mut rng);
        let users: Vec<_> = (0..3).map(|_| reg.register_user(&mut rng).unwrap()).collect();
        let (r1, _) = reg.register_rp("https://a.example/cb", &mut rng).unwrap();
        let (r2, _) = reg.register_rp("https://b.example/cb", &mut rng).unwrap();
        let leaked: Vec<u64> = users.iter().map(|u| *reg.idp_key(*u).unwrap()).collect();
        let b = reg.backend().clone();
        let (x1, x2) = (reg.rp(r1).unwrap().x.clone(), reg.rp(r2).unwrap().x.clone());
        for u in &users {
            let (a1, a2) = (reg.account(*u, r1).unwrap(), reg.account(*u, r2).unwrap());
            let linked: Vec<_> =
                leaked.iter().filter(|k| b.evaluate(k, &x1).unwrap() == *a1 && b.evaluate(k, &x2).unwrap() == *a2).collect();
            assert_eq!(linked, vec![reg.idp_key(*u).unwrap()]);
        }
    }
}
