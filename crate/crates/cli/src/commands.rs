use std::sync::Arc;
use std::time::Instant;

use idtsso::games::{game_impersonation, run_columns, Column, GridOptions, ImpersonationConfig};
use idtsso::idt::{Registry, RegistryOptions};
use idtsso::oprf::{Oprf, OprfKind};
use idtsso::params::{derive_rng, with_backend, BackendSpec, BackendVisitor, Describe, Tier};
use idtsso::protocol::{Deployment, FlowConfig, PidRpBy, UserChoices};
use idtsso::sig::SigningKey;
use idtsso::{canon, Error};
use rand::RngCore;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

fn spec(c: &RunConfig, kind: OprfKind) -> BackendSpec {
    BackendSpec::new(kind, c.tier, c.seed).deterministic(c.deterministic_he && kind == OprfKind::DyHe)
}

fn kinds(c: &RunConfig) -> Vec<OprfKind> {
    match c.backend {
        Some(k) => vec![k],
        None => OprfKind::ALL.to_vec(),
    }
}

pub fn gen_params(c: &RunConfig) -> Result<Value, CliError> {
    let mut params = serde_json::Map::new();
    for kind in kinds(c) {
        params.insert(kind.name().into(), with_backend(&spec(c, kind), Describe)?);
    }
    Ok(json!({"command": "gen-params", "params": params}))
}

struct FlowRun<'a>(&'a RunConfig);

impl BackendVisitor for FlowRun<'_> {
    type Output = Result<Value, Error>;

    fn visit<B: Oprf>(self, backend: B) -> Result<Value, Error> {
        let c = self.0;
        let b = Arc::new(backend);
        let mut rng = derive_rng(c.seed, "run-flow", u64::MAX);
        let options = RegistryOptions { unsafe_backend: c.unsafe_backend };
        let mut reg = Registry::new(b.clone(), SigningKey::generate(&mut rng), options)?;
        let users = (0..c.users).map(|_| reg.register_user(&mut rng)).collect::<Result<Vec<_>, _>>()?;
        let mut rps = Vec::new();
        for j in 0..c.rps {
            rps.push(reg.register_rp(&format!("https://rp{j}.example/cb"), &mut rng)?.0);
        }
        let d = Deployment::new(reg, &mut rng)?;
        let flow = FlowConfig {
            flow: c.flow,
            pid_checking: c.pid_checking,
            pid_rp_computed_by: if c.vulnerable_pid_by_rp { PidRpBy::Rp } else { PidRpBy::User },
            account_sync: c.account_sync,
            attack_game: c.game,
        };

        let mut logins = Vec::new();
        let (mut accepted, mut matching) = (0, 0);
        for i in 0..c.trials.unwrap_or(1) {
            let (user, rp) = (users[i as usize % users.len()], rps[i as usize % rps.len()]);
            let choices = UserChoices { tamper_pid_u: c.tamper_token, ..UserChoices::default() };
            let outcome = d.login(user, rp, &flow, choices, &mut derive_rng(c.seed, "run-flow", i))?;
            // The oracle: what the IdP-side account table says this user owns at this RP.
            let expected = canon::to_value(d.registry().account(user, rp)?);
            let matches = outcome.account.as_ref() == Some(&expected);
            accepted += outcome.accepted() as u64;
            matching += matches as u64;
            logins.push(json!({
                "user": user,
                "rp": rp,
                "expected_account": expected,
                "matches_account_table": matches,
                "outcome": outcome,
            }));
        }
        let mut doc = json!({
            "command": "run-flow",
            "params": b.describe(),
            "logins": logins,
            "summary": {"logins": logins.len(), "accepted": accepted, "matching_account_table": matching},
        });
        if c.game {
            let cfg = ImpersonationConfig {
                vulnerable: c.vulnerable_pid_by_rp,
                checking: c.pid_checking,
                trials: c.trials.unwrap_or(100),
                seed: c.seed,
            };
            doc["impersonation"] = canon::to_value(&game_impersonation(b, &cfg)?);
        }
        Ok(doc)
    }
}

pub fn run_flow(c: &RunConfig) -> Result<Value, CliError> {
    let kind = c.backend_or(OprfKind::HashDh);
    if !kind.has_account_uniqueness() && !c.unsafe_backend {
        return Err(CliError::Usage(format!("{kind} accounts are not unique; full protocol runs need --unsafe-backend")));
    }
    Ok(with_backend(&spec(c, kind), FlowRun(c))??)
}

/// Grid columns a backend selection covers.
fn columns(c: &RunConfig) -> Result<Vec<Column>, CliError> {
    Ok(match c.backend {
        None => Column::ALL.to_vec(),
        Some(OprfKind::HashDh) => vec![Column::HashDh],
        Some(OprfKind::NrHe) => vec![Column::NrHe],
        Some(OprfKind::DyHe) => vec![Column::DyHe],
        Some(OprfKind::TwoHashRsaN) if c.expose_xk => vec![Column::RsaNPublic],
        Some(OprfKind::TwoHashRsaN) => vec![Column::RsaNSecret],
        Some(k) => return Err(CliError::Usage(format!("{k} has no column in the property table"))),
    })
}

pub fn run_games(c: &RunConfig) -> Result<(Value, usize), CliError> {
    if c.expose_xk && c.backend.is_some_and(|k| k != OprfKind::TwoHashRsaN) {
        return Err(CliError::Usage("--expose-xk selects the public 2HashRSA_N column only".into()));
    }
    let options = GridOptions {
        seed: c.seed,
        trials: c.trials.unwrap_or(10_000),
        samples: c.samples.unwrap_or(10_000),
        deterministic_he: c.deterministic_he,
    };
    let cols = columns(c)?;
    let run = run_columns(options, &cols)?;
    let expected = idtsso::games::expected_grid();
    let cells: Vec<Value> = run
        .reports
        .iter()
        .map(|r| {
            let e = expected.get(r.row, r.column);
            json!({
                "row": r.row,
                "column": r.column,
                "expected": e.symbol(),
                "observed": r.report.verdict.symbol(),
                "matches": e == r.report.verdict,
            })
        })
        .collect();
    for cell in &cells {
        eprintln!(
            "{:<28} {:<22} expected {}  observed {}{}",
            cell["row"].as_str().unwrap_or_default(),
            cell["column"].as_str().unwrap_or_default(),
            cell["expected"].as_str().unwrap_or_default(),
            cell["observed"].as_str().unwrap_or_default(),
            if cell["matches"] == true { "" } else { "  MISMATCH" },
        );
    }
    let mismatches = run.mismatches.len();
    let doc = json!({
        "command": "run-games",
        "columns": cols,
        "cells": cells,
        "expected_grid": expected.render(),
        "observed_grid": run.observed.render(),
        "run": run,
    });
    Ok((doc, mismatches))
}

/// Latency summary in nanoseconds.
fn summarize(op: &str, mut ns: Vec<u128>) -> Value {
    ns.sort_unstable();
    let at = |q: f64| ns[((ns.len() - 1) as f64 * q).round() as usize];
    let median = at(0.5);
    let mut dev: Vec<u128> = ns.iter().map(|v| v.abs_diff(median)).collect();
    dev.sort_unstable();
    json!({
        "op": op,
        "samples": ns.len(),
        "median_ns": median,
        "p95_ns": at(0.95),
        "min_ns": ns[0],
        "max_ns": ns[ns.len() - 1],
        "mad_ns": dev[dev.len() / 2],
    })
}

struct Bench {
    iterations: u64,
    seed: u64,
}

/// One timed BL, OPR, UBL, sign, verify round on fresh values.
fn round<B: Oprf, R: RngCore>(b: &B, signer: &SigningKey, rng: &mut R) -> Result<[u128; 5], Error> {
    let k = b.random_key(rng)?;
    let x = b.random_input(rng);
    let omega = if b.flags().has_omega { Some(b.gen_omega(&k, rng)?) } else { None };
    let t = b.random_blind(omega.as_ref(), rng)?;
    let mut ns = [0; 5];

    let s = Instant::now();
    let x_prime = b.blind_with(&x, &t, omega.as_ref())?;
    ns[0] = s.elapsed().as_nanos();
    let s = Instant::now();
    let z_prime = b.serve(&k, &x_prime, omega.as_ref())?;
    ns[1] = s.elapsed().as_nanos();
    let s = Instant::now();
    let z = b.unblind(&z_prime, &x, &t, omega.as_ref())?;
    ns[2] = s.elapsed().as_nanos();

    let msg = canon::to_bytes(&z_prime);
    let s = Instant::now();
    let sig = signer.sign(&msg, rng);
    ns[3] = s.elapsed().as_nanos();
    let s = Instant::now();
    let ok = signer.verifying_key().verify(&msg, &sig);
    ns[4] = s.elapsed().as_nanos();
    if !ok || z != b.evaluate(&k, &x)? {
        return Err(Error::Unsupported("benchmark round trip disagreed with PR".into()));
    }
    Ok(ns)
}

impl BackendVisitor for Bench {
    type Output = Result<Value, Error>;

    fn visit<B: Oprf>(self, b: B) -> Result<Value, Error> {
        let mut rng = derive_rng(self.seed, "bench", 0);
        let signer = SigningKey::generate(&mut rng);
        let mut times: [Vec<u128>; 5] = Default::default();
        let mut skipped = 0;
        while (times[0].len() as u64) < self.iterations {
            match round(&b, &signer, &mut rng) {
                Ok(ns) => times.iter_mut().zip(ns).for_each(|(v, t)| v.push(t)),
                // Desk parameters are small enough for a random blind to hit a
                // degenerate or refused value; the protocol would retry too.
                Err(Error::Degenerate(_) | Error::Domain(_)) if skipped < 10 * self.iterations => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        let rows: Vec<Value> =
            ["BL", "OPR", "UBL", "sign", "verify"].into_iter().zip(times).map(|(op, ns)| summarize(op, ns)).collect();
        Ok(json!({"rows": rows, "refused_rounds_skipped": skipped}))
    }
}

pub fn bench(c: &RunConfig) -> Result<Value, CliError> {
    let iterations = c.trials.unwrap_or(200).max(1);
    let mut warnings = Vec::new();
    if c.tier != Tier::Full {
        warnings.push(format!("{} parameters are not production size; timings are not representative", c.tier));
    }
    let mut rows = serde_json::Map::new();
    for kind in kinds(c) {
        let spec = spec(c, kind);
        rows.insert(kind.name().into(), with_backend(&spec, Bench { iterations, seed: c.seed })??);
    }
    Ok(json!({"command": "bench", "iterations": iterations, "warnings": warnings, "latencies": rows}))
}
