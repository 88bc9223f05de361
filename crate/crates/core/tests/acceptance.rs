//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout.
//! Exits nonzero when a criterion fails, unless the failure is the one
//! documented divergence and matches it exactly.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use idtsso::games::{
    account_uniqueness, correctness_exhaustion, game_idp_untraceability, game_impersonation, game_rp_unlinkability, run_grid,
    Cell, Column, GameReport, GridOptions, ImpersonationConfig, Row, UnlinkabilityConfig, UntraceabilityConfig,
};
use idtsso::group::GroupParams;
use idtsso::idt::{AccountStatus, Registry, RegistryOptions};
use idtsso::oprf::{Oprf, OprfKind};
use idtsso::paillier::PaillierKeys;
use idtsso::params::{derive_rng, with_backend, BackendSpec, BackendVisitor, Tier};
use idtsso::protocol::{AccountSync, Deployment, Flow, FlowConfig, Stage, UserChoices};
use idtsso::sig::SigningKey;
use idtsso::{canon, DeskDyHe, DeskHashDh, DeskNrHe};
use rand::Rng;
use serde_json::Value;

const C1_BUDGET: Duration = Duration::from_secs(10);
const C2_BUDGET: Duration = Duration::from_secs(30);
const C5_BUDGET: Duration = Duration::from_secs(300);
const IMPERSONATION_TRIALS: u64 = 100;
const PRIVACY_SAMPLES: u64 = 10_000;
/// Security-game trials per grid cell; every such cell is all-or-nothing.
const GRID_TRIALS: u64 = 1_000;
const LEAK_TRIALS: u64 = 1_000;
const FLOW_TRIALS: u64 = 100;
const REUSE_LOGINS: usize = 10;
const SECRECY_RUNS: u64 = 1_000;

/// The one cell where the games disagree with the table; see the ledger.
const DOCUMENTED_GRID_MISMATCH: (Row, Column, Cell, Cell) =
    (Row::RpDesignationChecked, Column::RsaNPublic, Cell::Holds, Cell::Broken);

struct Line {
    id: u8,
    pass: bool,
    /// A failure that matches its documented analysis.
    documented: bool,
    detail: String,
}

fn line(id: u8, pass: bool, detail: impl Into<String>) -> Line {
    Line { id, pass, documented: false, detail: detail.into() }
}

/// Runs a game function on whatever backend a spec builds.
macro_rules! visitor {
    ($name:ident, $cfg:ty, |$b:ident, $c:ident| $body:expr) => {
        struct $name($cfg);
        impl BackendVisitor for $name {
            type Output = GameReport;
            fn visit<B: Oprf>(self, backend: B) -> GameReport {
                let $b = Arc::new(backend);
                let $c = self.0;
                $body.expect(stringify!($name))
            }
        }
    };
}

visitor!(Correctness, u64, |b, seed| correctness_exhaustion(&*b, seed));
visitor!(Uniqueness, (), |b, _c| account_uniqueness(&*b));
visitor!(Impersonation, ImpersonationConfig, |b, c| game_impersonation(b, &c));
visitor!(Untraceability, UntraceabilityConfig, |b, c| game_idp_untraceability(b, &c));
visitor!(Unlinkability, UnlinkabilityConfig, |b, c| game_rp_unlinkability(b, &c));

fn desk(kind: OprfKind) -> BackendSpec {
    BackendSpec::new(kind, Tier::Desk, 0)
}

fn lab(kind: OprfKind) -> BackendSpec {
    BackendSpec::new(kind, Tier::Lab, 0)
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let mut specs: Vec<BackendSpec> = OprfKind::ALL.iter().map(|k| desk(*k).unity_filter(false)).collect();
    specs.push(desk(OprfKind::DyHe).deterministic(true));
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in &specs {
        let r = with_backend(spec, Correctness(0)).expect("desk backend");
        ok &= r.verdict == Cell::Holds && r.successes == r.trials && r.trials > 0;
        parts.push(format!("{}{} {}/{}", spec.kind, if spec.deterministic_he { "(det)" } else { "" }, r.successes, r.trials));
    }
    let t = start.elapsed();
    line(1, ok && t < C1_BUDGET, format!("{} in {t:.1?} (budget {C1_BUDGET:?})", parts.join(", ")))
}

fn criterion_2() -> Line {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [OprfKind::HashDh, OprfKind::DyHe, OprfKind::TwoHashRsaN] {
        let r = with_backend(&desk(kind), Uniqueness(())).expect("desk backend");
        ok &= r.verdict == Cell::Holds && r.trials > 0;
        parts.push(format!("{kind} injective over {} pairs", r.trials));
    }
    let nr = with_backend(&desk(OprfKind::NrHe), Uniqueness(())).expect("desk NR_HE");
    // Re-evaluate the witness independently of the scan.
    let witness_holds = nr.witness.as_ref().is_some_and(|w| {
        let key = |v: &Value| -> Vec<u64> {
            v["a"].as_array().unwrap().iter().map(|h| u64::from_str_radix(h.as_str().unwrap(), 16).unwrap()).collect()
        };
        let b = DeskNrHe::new(GroupParams::desk(), 2, 20).unwrap();
        let x = canon::from_value(&w["x"]).unwrap();
        let (k1, k2) = (key(&w["k_hat"]), key(&w["k_check"]));
        k1 != k2 && b.evaluate(&k1, &x).unwrap() == b.evaluate(&k2, &x).unwrap()
    });
    ok &= nr.verdict == Cell::Broken && witness_holds;
    parts.push(format!("NR_HE collision witness {}", nr.witness.map(|w| w.to_string()).unwrap_or_default()));
    let t = start.elapsed();
    line(2, ok && t < C2_BUDGET, format!("{} in {t:.1?} (budget {C2_BUDGET:?})", parts.join("; ")))
}

fn criterion_3() -> Line {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [OprfKind::HashDh, OprfKind::DyHe] {
        for (vulnerable, checking, want) in [(true, false, 1.0), (false, false, 0.0), (true, true, 1.0)] {
            let cfg = ImpersonationConfig { vulnerable, checking, trials: IMPERSONATION_TRIALS, seed: 0 };
            let rate = with_backend(&lab(kind), Impersonation(cfg)).expect("lab backend").success_rate();
            ok &= rate == want;
            parts.push(format!("{kind} vulnerable={vulnerable} checking={checking}: {rate}"));
        }
    }
    line(3, ok, format!("{} over {IMPERSONATION_TRIALS} trials each", parts.join(", ")))
}

fn criterion_4() -> Line {
    let run =
        run_grid(GridOptions { seed: 0, trials: GRID_TRIALS, samples: PRIVACY_SAMPLES, deterministic_he: false }).expect("grid");
    let pass = run.mismatches.is_empty();
    let documented = run.mismatches == [DOCUMENTED_GRID_MISMATCH];
    let detail = if pass {
        "all 40 cells match the transcription".to_string()
    } else {
        let cells: Vec<_> = run
            .mismatches
            .iter()
            .map(|(r, c, e, o)| format!("{} / {}: expected {e}, observed {o}", r.title(), c.title()))
            .collect();
        format!("{} mismatching cell(s): {}", cells.len(), cells.join("; "))
    };
    Line { id: 4, pass, documented, detail }
}

fn criterion_5() -> Line {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    let trace_cfg = UntraceabilityConfig { samples: PRIVACY_SAMPLES, ..Default::default() };
    let link_cfg = |checking| UnlinkabilityConfig { samples: PRIVACY_SAMPLES, checking, ..Default::default() };
    for (name, kind, checking) in [
        ("HashDH", OprfKind::HashDh, false),
        ("HashECDH", OprfKind::HashEcdh, false),
        ("DY_HE probabilistic", OprfKind::DyHe, false),
        ("2HashRSA_N checking off", OprfKind::TwoHashRsaN, false),
    ] {
        let trace = with_backend(&desk(kind), Untraceability(trace_cfg.clone())).expect("desk backend");
        let link = with_backend(&lab(kind), Unlinkability(link_cfg(checking))).expect("lab backend");
        let (te, le) = (trace.estimate.unwrap(), link.estimate.unwrap());
        ok &= te.contains_zero() && le.contains_zero() && te.samples >= PRIVACY_SAMPLES && le.samples >= PRIVACY_SAMPLES;
        parts.push(format!(
            "{name}: trace adv {:+.4} [{:+.4}, {:+.4}], link adv {:+.4} [{:+.4}, {:+.4}]",
            te.advantage, te.ci_low, te.ci_high, le.advantage, le.ci_low, le.ci_high
        ));
    }
    for (name, spec, checking) in [
        ("2HashRSA distinct-N", lab(OprfKind::TwoHashRsa), false),
        ("2HashRSA_N checking on", lab(OprfKind::TwoHashRsaN), true),
        ("DY_HE deterministic", lab(OprfKind::DyHe).deterministic(true), false),
    ] {
        let link = with_backend(&spec, Unlinkability(link_cfg(checking))).expect("lab backend");
        let e = link.estimate.unwrap();
        ok &= e.advantage == 1.0;
        parts.push(format!("{name}: link adv {:+.4}", e.advantage));
    }
    let t = start.elapsed();
    line(5, ok && t < C5_BUDGET, format!("{} in {t:.1?} (budget {C5_BUDGET:?})", parts.join("; ")))
}

fn criterion_6() -> Line {
    let mut counts = Vec::new();
    for deterministic in [true, false] {
        let b = DeskDyHe::new(GroupParams::desk(), PaillierKeys::desk(), deterministic).unwrap();
        let mut rng = derive_rng(0, "deterministic-he", u64::from(deterministic));
        let k = b.random_key(&mut rng).unwrap();
        let stored = b.gen_omega(&k, &mut rng).unwrap();
        let mut matches = 0u64;
        for _ in 0..LEAK_TRIALS {
            let x = b.random_input(&mut rng);
            let omega = b.gen_omega(&k, &mut rng).unwrap();
            let t = b.random_blind(Some(&omega), &mut rng).unwrap();
            let x_prime = b.blind_with(&x, &t, Some(&omega)).unwrap();
            let restored = b.restore_omega(&x, &x_prime, &t).unwrap();
            if canon::to_bytes(&canon::to_value(&restored)) == canon::to_bytes(&canon::to_value(&stored)) {
                matches += 1;
            }
        }
        counts.push(matches);
    }
    let ok = counts == [LEAK_TRIALS, 0];
    line(
        6,
        ok,
        format!(
            "restored omega equals stored Enc(k): deterministic {}/{LEAK_TRIALS}, probabilistic {}/{LEAK_TRIALS}",
            counts[0], counts[1]
        ),
    )
}

fn deployment<B: Oprf>(b: B, users: usize, rps: usize, seed: u64) -> Deployment<B> {
    let mut rng = derive_rng(seed, "deployment", 0);
    let mut reg = Registry::new(Arc::new(b), SigningKey::generate(&mut rng), RegistryOptions::default()).unwrap();
    for j in 0..rps {
        reg.register_rp(&format!("https://rp{j}.example/cb"), &mut rng).unwrap();
    }
    for _ in 0..users {
        reg.register_user(&mut rng).unwrap();
    }
    Deployment::new(reg, &mut rng).unwrap()
}

/// Every ť ≠ t̂ at the single user's RP, checking off, sync off.
struct Unmatched;

impl BackendVisitor for Unmatched {
    type Output = (u64, u64);
    fn visit<B: Oprf>(self, b: B) -> (u64, u64) {
        let d = deployment(b, 1, 1, 7);
        let (u, rp) = (d.registry().users()[0], d.registry().rps()[0].handle);
        let cfg = FlowConfig { account_sync: AccountSync::Off, ..FlowConfig::default() };
        let mut rng = derive_rng(7, "unmatched", 0);
        let (mut total, mut meaningless) = (0, 0);
        let omega = d.idp_omega(u, &mut rng).unwrap();
        let blinds = d.backend().small_blinds(omega.as_ref(), &mut rng).expect("desk blinds");
        for t_hat in &blinds {
            for t_check in blinds.iter().filter(|t| *t != t_hat) {
                let choices = UserChoices { blind: Some(t_hat.clone()), told_blind: Some(t_check.clone()), ..Default::default() };
                let out = d.login(u, rp, &cfg, choices, &mut rng).unwrap();
                total += 1;
                meaningless += u64::from(out.accepted() && out.status == Some(AccountStatus::Meaningless));
            }
        }
        (total, meaningless)
    }
}

fn criterion_7() -> Line {
    let d = deployment(DeskHashDh::new(GroupParams::desk()), 2, 2, 3);
    // A credential minted by an unrelated IdP deployment.
    let other = deployment(DeskHashDh::new(GroupParams::desk()), 1, 1, 4);
    let (u, rp) = (d.registry().users()[0], d.registry().rps()[0].handle);
    let cfg = FlowConfig { flow: Flow::AuthCode, ..FlowConfig::default() };
    let mut denied = [0u64; 3];
    for i in 0..FLOW_TRIALS {
        let mut rng = derive_rng(3, "auth-code", i);
        let pending = |rng: &mut _| d.begin_auth_code(u, rp, &cfg, UserChoices::default(), rng).unwrap().unwrap();
        let cred = d.rp_credential(rp).unwrap();
        // Stolen code without the verifier.
        let p = pending(&mut rng);
        denied[0] += u64::from(d.idp_retrieve_token(&p.code, None, Some(&cred)).is_err());
        // Replay after the RP's own retrieval.
        let p = pending(&mut rng);
        let first = d.idp_retrieve_token(&p.code, Some(&p.pkce.verifier), Some(&cred));
        let second = d.idp_retrieve_token(&p.code, Some(&p.pkce.verifier), Some(&cred));
        denied[1] += u64::from(first.is_ok() && second.is_err());
        // Retriever without the RP credential, even with code and verifier.
        let p = pending(&mut rng);
        let forged = other.rp_credential(other.registry().rps()[0].handle).unwrap();
        let unauth = d.idp_retrieve_token(&p.code, Some(&p.pkce.verifier), None).is_err()
            && d.idp_retrieve_token(&p.code, Some(&p.pkce.verifier), Some(&forged)).is_err();
        denied[2] += u64::from(unauth);
    }
    let mut parts = vec![format!(
        "stolen code {}/{FLOW_TRIALS}, replayed code {}/{FLOW_TRIALS}, unauthenticated retriever {}/{FLOW_TRIALS} denied",
        denied[0], denied[1], denied[2]
    )];
    let mut ok = denied == [FLOW_TRIALS; 3];
    for kind in [OprfKind::HashDh, OprfKind::HashEcdh, OprfKind::DyHe] {
        let (total, meaningless) = with_backend(&desk(kind), Unmatched).unwrap();
        ok &= total > 0 && total == meaningless;
        parts.push(format!("{kind} unmatched t: {meaningless}/{total} meaningless"));
    }
    line(7, ok, parts.join("; "))
}

fn criterion_8() -> Line {
    let d = deployment(idtsso::WideHashDh::new(idtsso::group::gen_group(64, &mut derive_rng(0, "reuse", 0)).unwrap()), 3, 2, 5);
    let (u, rp) = (d.registry().users()[0], d.registry().rps()[0].handle);
    let mut rng = derive_rng(5, "reuse", 1);
    let t_hat = d.backend().random_blind(None, &mut rng).unwrap();
    let t_check = d.backend().random_blind(None, &mut rng).unwrap();
    let choices = || UserChoices::<idtsso::WideHashDh> {
        blind: Some(t_hat.clone()),
        told_blind: Some(t_check.clone()),
        ..Default::default()
    };
    let off = FlowConfig { account_sync: AccountSync::Off, ..FlowConfig::default() };
    let accounts: BTreeSet<String> = (0..REUSE_LOGINS)
        .map(|_| {
            let out = d.login(u, rp, &off, choices(), &mut rng).unwrap();
            assert!(out.accepted() && out.status == Some(AccountStatus::Meaningless), "{:?}", out.rejection);
            serde_json::to_string(&out.account).unwrap()
        })
        .collect();
    let eager = FlowConfig { account_sync: AccountSync::Eager, ..FlowConfig::default() };
    let flipped = d.login(u, rp, &eager, choices(), &mut rng).unwrap();
    let rejected = flipped.rejection.as_ref().is_some_and(|r| r.stage == Stage::Account);
    let ok = accounts.len() == 1 && rejected;
    line(
        8,
        ok,
        format!(
            "{REUSE_LOGINS} logins with fixed (t, t') gave {} distinct meaningless account(s); with instant sync: {}",
            accounts.len(),
            flipped.rejection.map(|r| r.to_string()).unwrap_or_else(|| "accepted".into())
        ),
    )
}

/// Hex strings anywhere in a JSON value.
fn leaves(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) => out.push(s.clone()),
        Value::Array(a) => a.iter().for_each(|x| leaves(x, out)),
        Value::Object(m) => m.values().for_each(|x| leaves(x, out)),
        _ => {}
    }
}

struct Secrecy(u64);

impl BackendVisitor for Secrecy {
    /// (runs, artifacts with an ID_U encoding, IdP views with a t or x encoding)
    type Output = (u64, u64, u64);
    fn visit<B: Oprf>(self, b: B) -> (u64, u64, u64) {
        let d = deployment(b, 4, 3, 11);
        let reg = d.registry();
        let secrets: Vec<String> = reg.users().iter().flat_map(|u| reg.backend().key_secrets(reg.idp_key(*u).unwrap())).collect();
        let rp_inputs: Vec<String> = reg
            .rps()
            .iter()
            .flat_map(|r| {
                let mut v = Vec::new();
                leaves(&canon::to_value(&r.x), &mut v);
                v
            })
            .collect();
        let (mut key_leaks, mut view_leaks) = (0, 0);
        let export = serde_json::to_string(&reg.export(false)).unwrap();
        key_leaks += u64::from(secrets.iter().any(|s| export.contains(s.as_str())));
        for i in 0..self.0 {
            let mut rng = derive_rng(11, "secrecy", i);
            let users = reg.users();
            let u = users[rng.gen_range(0..users.len())];
            let rp = reg.rps()[rng.gen_range(0..reg.rps().len())].handle;
            let cfg = FlowConfig {
                flow: if rng.gen() { Flow::Implicit } else { Flow::AuthCode },
                pid_checking: rng.gen(),
                account_sync: [AccountSync::Eager, AccountSync::Lazy, AccountSync::Off][rng.gen_range(0..3)],
                ..FlowConfig::default()
            };
            let out = d.login(u, rp, &cfg, UserChoices::default(), &mut rng).unwrap();
            assert!(out.accepted(), "{:?}", out.rejection);
            let artifact = serde_json::to_string(&out).unwrap();
            key_leaks += u64::from(secrets.iter().any(|s| artifact.contains(s.as_str())));
            let rtuple = out.rp_view.as_ref().unwrap();
            let mut forbidden = rp_inputs.clone();
            for name in ["t", "x"] {
                leaves(rtuple.get(name).unwrap(), &mut forbidden);
            }
            let view = serde_json::to_string(out.idp_view.as_ref().unwrap()).unwrap();
            view_leaks += u64::from(forbidden.iter().any(|s| view.contains(s.as_str())));
        }
        (self.0, key_leaks, view_leaks)
    }
}

fn criterion_9() -> Line {
    let kinds = [OprfKind::HashDh, OprfKind::HashEcdh, OprfKind::DyHe, OprfKind::TwoHashRsa, OprfKind::TwoHashRsaN];
    let per = SECRECY_RUNS / kinds.len() as u64;
    let (mut runs, mut keys, mut views) = (0, 0, 0);
    for kind in kinds {
        let (r, k, v) = with_backend(&lab(kind).keys(4), Secrecy(per)).unwrap();
        runs += r;
        keys += k;
        views += v;
    }
    line(9, keys == 0 && views == 0 && runs >= SECRECY_RUNS, format!(
        "{runs} randomized runs over {} backends: {keys} artifacts with an ID_U encoding, {views} IdP views with a t or x encoding",
        kinds.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [fn() -> Line; 9] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9];
    let mut ok = true;
    for c in criteria {
        let l = c();
        let status = match (l.pass, l.documented) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented divergence)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {status}: {}", l.id, l.detail);
        ok &= l.pass || l.documented;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
