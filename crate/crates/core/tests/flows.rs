//! End-to-end logins through the public API, one per backend and flow.

use std::sync::Arc;

use idtsso::canon;
use idtsso::idt::{AccountStatus, Registry, RegistryOptions};
use idtsso::oprf::{Oprf, OprfKind};
use idtsso::params::{derive_rng, with_backend, BackendSpec, BackendVisitor, Tier};
use idtsso::protocol::{AccountSync, Deployment, Flow, FlowConfig, Stage, UserChoices};
use idtsso::sig::SigningKey;

/// Runs every (user, RP) login once and returns how many derived the
/// registry's account, plus the stage of the first rejection if any.
struct Logins(FlowConfig);

impl BackendVisitor for Logins {
    type Output = (usize, usize, Option<Stage>);

    fn visit<B: Oprf>(self, b: B) -> Self::Output {
        let mut rng = derive_rng(11, "flows", 0);
        let unsafe_backend = !b.kind().has_account_uniqueness();
        let mut reg = Registry::new(Arc::new(b), SigningKey::generate(&mut rng), RegistryOptions { unsafe_backend }).unwrap();
        let users: Vec<_> = (0..3).map(|_| reg.register_user(&mut rng).unwrap()).collect();
        let rps: Vec<_> = (0..2).map(|j| reg.register_rp(&format!("https://rp{j}.test/cb"), &mut rng).unwrap().0).collect();
        let d = Deployment::new(reg, &mut rng).unwrap();
        let (mut total, mut matched, mut rejected) = (0, 0, None);
        for &u in &users {
            for &rp in &rps {
                let out = d.login(u, rp, &self.0, UserChoices::default(), &mut rng).unwrap();
                total += 1;
                if out.account == Some(canon::to_value(d.registry().account(u, rp).unwrap()))
                    && out.status == Some(AccountStatus::Meaningful)
                {
                    matched += 1;
                }
                rejected = rejected.or(out.rejection.map(|r| r.stage));
            }
        }
        (total, matched, rejected)
    }
}

#[test]
fn every_backend_logs_in_under_both_flows() {
    for kind in OprfKind::ALL {
        for tier in [Tier::Desk, Tier::Lab] {
            for flow in [Flow::Implicit, Flow::AuthCode] {
                for pid_checking in [false, true] {
                    let cfg = FlowConfig { flow, pid_checking, ..FlowConfig::default() };
                    // At N = 35 an honest x' is +-1 often enough for the unity
                    // filter to refuse it.
                    let literal = tier == Tier::Desk && matches!(kind, OprfKind::TwoHashRsa | OprfKind::TwoHashRsaN);
                    let spec = BackendSpec::new(kind, tier, 2).keys(3).unity_filter(!literal);
                    let (total, matched, rejected) = with_backend(&spec, Logins(cfg)).unwrap();
                    assert_eq!((matched, rejected), (total, None), "{kind} {tier} {flow:?} checking={pid_checking}");
                }
            }
        }
    }
}

#[test]
fn lazy_and_off_sync_still_accept_honest_logins() {
    for account_sync in [AccountSync::Lazy, AccountSync::Off] {
        let cfg = FlowConfig { account_sync, ..FlowConfig::default() };
        let (total, matched, _) = with_backend(&BackendSpec::new(OprfKind::HashDh, Tier::Lab, 0), Logins(cfg)).unwrap();
        assert_eq!(matched, total);
    }
}
