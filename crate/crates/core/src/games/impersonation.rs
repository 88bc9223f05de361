//! Impersonation by a malicious RP when RPs compute PID_RP.
//!
//! RP C wants to log into RP A as victim V. In the vulnerable mode A picks
//! t_A and hands out PID_RP = BL(x_A, t_A); C relays it to V as if it were
//! its own, receives V's token at its certified endpoint and replays it to
//! A, who derives V's account. In the standard mode V blinds x_C itself,
//! so the same relay gives A nothing.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::idt::{Registry, RegistryOptions};
use crate::oprf::{BlindingState, Oprf};
use crate::params::derive_rng;
use crate::protocol::{deliver_token, AccountSync, Deployment, FlowConfig, PidRpBy, RpDecision};
use crate::sig::SigningKey;

use super::{Cell, GameReport};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpersonationConfig {
    pub vulnerable: bool,
    pub checking: bool,
    pub trials: u64,
    pub seed: u64,
}

impl Default for ImpersonationConfig {
    fn default() -> Self {
        Self { vulnerable: true, checking: false, trials: 100, seed: 0 }
    }
}

pub fn game_impersonation<B: Oprf>(b: Arc<B>, cfg: &ImpersonationConfig) -> Result<GameReport> {
    let kind = b.kind();
    let mut r = GameReport::new("impersonation", kind, serde_json::to_value(cfg).expect("plain config"));
    r.scope = "relay of a victim's token by a malicious RP to an honest RP".into();
    let flow = FlowConfig {
        pid_checking: cfg.checking,
        pid_rp_computed_by: if cfg.vulnerable { PidRpBy::Rp } else { PidRpBy::User },
        account_sync: AccountSync::Eager,
        attack_game: true,
        ..FlowConfig::default()
    };
    flow.validate()?;
    let mut rng = derive_rng(cfg.seed, "impersonation", u64::MAX);
    let mut reg = Registry::new(b, SigningKey::generate(&mut rng), RegistryOptions { unsafe_backend: true })?;
    let (a, _) = reg.register_rp("https://honest.example/cb", &mut rng)?;
    let (c, _) = reg.register_rp("https://malicious.example/cb", &mut rng)?;
    let victim = reg.register_user(&mut rng)?;
    reg.register_user(&mut rng)?;
    let d = Deployment::new(reg, &mut rng)?;
    let c_endpoint = d.registry().rp(c)?.endpoint.clone();
    let goal = d.registry().account(victim, a)?.clone();

    let outcomes: Vec<bool> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(cfg.seed, "impersonation", i);
            let omega = d.idp_omega(victim, &mut rng)?;
            let (pid_rp, t) = if cfg.vulnerable {
                // A computes PID_RP for what it believes is a login at A.
                d.rp_compute_pid_rp(a, omega.as_ref(), &mut rng)?
            } else {
                // V blinds x_C for its login at C and tells C the blind.
                let b = d.backend();
                let mut state = BlindingState::fresh(b, omega.as_ref(), &mut rng)?;
                let x_c = &d.registry().rp(c)?.x;
                (state.blind(b, x_c, omega.as_ref())?, state.t().clone())
            };
            let token = d.idp_sign_token(victim, &pid_rp, omega.as_ref(), cfg.checking, &mut rng)?;
            if deliver_token(d.verifying_key(), &d.rp_certificate(c)?, &c_endpoint).is_err() {
                return Ok(false);
            }
            // C replays V's token to A, presenting the blind it learned.
            Ok(match d.rp_accept(a, &token, &t, omega.as_ref(), &flow)? {
                RpDecision::Accepted { account, .. } => account == goal,
                RpDecision::Rejected(_) => false,
            })
        })
        .collect::<Result<_>>()?;
    r.trials = cfg.trials;
    r.successes = outcomes.iter().filter(|o| **o).count() as u64;
    r.verdict = Cell::from_successes(r.successes, r.trials);
    r.details = serde_json::json!({"mode": if cfg.vulnerable { "pid_rp_by_rp" } else { "pid_rp_by_user" }});
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oprf::OprfKind;
    use crate::params::{with_backend, BackendSpec, BackendVisitor, Tier};

    struct Rate(ImpersonationConfig);

    impl BackendVisitor for Rate {
        type Output = f64;
        fn visit<B: Oprf>(self, b: B) -> f64 {
            game_impersonation(Arc::new(b), &self.0).unwrap().success_rate()
        }
    }

    #[test]
    fn relay_succeeds_only_in_vulnerable_mode() {
        // Lab size, so an unrelated blind cannot land on the account by chance.
        let spec = BackendSpec::new(OprfKind::HashDh, Tier::Lab, 3);
        let run = |vulnerable, checking| {
            with_backend(&spec, Rate(ImpersonationConfig { vulnerable, checking, trials: 20, seed: 1 })).unwrap()
        };
        assert_eq!(run(true, false), 1.0);
        assert_eq!(run(true, true), 1.0);
        assert_eq!(run(false, false), 0.0);
        assert_eq!(run(false, true), 0.0);
    }
}
