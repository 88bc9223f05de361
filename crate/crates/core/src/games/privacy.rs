//! Distinguishing games for the two privacy properties.
//!
//! Untraceability: the IdP sees x' from one user's logins at two RPs and
//! guesses which RP. Unlinkability: colluding RPs, who also control some
//! users, see two r-tuples from honest users at different RPs and guess
//! whether they belong to the same user.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canon;
use crate::error::{Error, Result};
use crate::idt::{Registry, RegistryOptions, RpHandle, UserHandle};
use crate::oprf::{digest_bucket, rtuple_of, Oprf, RTuple};
use crate::params::derive_rng;
use crate::sig::SigningKey;

use super::stats::{chi_square, Estimate, MajorityClassifier};
use super::{Cell, GameReport};

/// Advantage lower bound (at the report's confidence) above which a
/// distinguisher counts as breaking the property.
pub const BREAK_ADVANTAGE: f64 = 0.5;

fn verdict(e: &Estimate) -> Cell {
    if e.contains_zero() {
        Cell::Holds
    } else if e.ci_low > BREAK_ADVANTAGE {
        Cell::Broken
    } else {
        Cell::Inconclusive
    }
}

fn registry<B: Oprf>(b: Arc<B>, users: usize, rps: usize, seed: u64, label: &str) -> Result<Registry<B>> {
    let mut rng = derive_rng(seed, label, u64::MAX);
    let mut reg = Registry::new(b, SigningKey::generate(&mut rng), RegistryOptions { unsafe_backend: true })?;
    for j in 0..rps {
        reg.register_rp(&format!("https://rp{j}.example/cb"), &mut rng)?;
    }
    for _ in 0..users {
        reg.register_user(&mut rng)?;
    }
    Ok(reg)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UntraceabilityConfig {
    /// Scored samples; as many again train the classifier.
    pub samples: u64,
    pub rps: usize,
    /// Give the IdP a digest of x itself, to show the harness can detect a leak.
    pub control: bool,
    pub seed: u64,
}

impl Default for UntraceabilityConfig {
    fn default() -> Self {
        Self { samples: 10_000, rps: 2, control: false, seed: 0 }
    }
}

pub fn game_idp_untraceability<B: Oprf>(b: Arc<B>, cfg: &UntraceabilityConfig) -> Result<GameReport> {
    let game = if cfg.control { "idp_untraceability_control" } else { "idp_untraceability" };
    let mut r = GameReport::new(game, b.kind(), serde_json::to_value(cfg).expect("plain config"));
    r.scope = "majority vote on server-computable features of PID_RP, trained on half the samples".into();
    if cfg.rps < 2 {
        r.trivial = true;
        r.verdict = Cell::Holds;
        r.details = serde_json::json!({"reason": "a single RP leaves nothing to trace"});
        return Ok(r);
    }
    let reg = registry(b.clone(), 1, cfg.rps, cfg.seed, game)?;
    let user = reg.users()[0];
    let key = reg.idp_key(user)?;
    let pair: Vec<_> = reg.rps()[..2].iter().map(|p| p.x.clone()).collect();
    // Half trains the classifier, half is scored.
    let samples: Vec<(Vec<u64>, bool)> = (0..2 * cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(cfg.seed, game, i);
            let label = rng.gen::<bool>();
            let x = &pair[usize::from(label)];
            let omega = if b.flags().has_omega { Some(b.gen_omega(key, &mut rng)?) } else { None };
            let t = b.random_blind(omega.as_ref(), &mut rng)?;
            let x_prime = b.blind_with(x, &t, omega.as_ref())?;
            let features = if cfg.control {
                vec![digest_bucket(&canon::to_value(x), 1 << 16)]
            } else {
                b.server_features(key, &x_prime, &pair)
            };
            Ok((features, label))
        })
        .collect::<Result<_>>()?;
    let (train, test) = samples.split_at(samples.len() / 2);
    let mut clf = MajorityClassifier::default();
    for (f, l) in train {
        clf.train(f.clone(), *l);
    }
    let correct = test.iter().filter(|(f, l)| clf.predict(f) == *l).count() as u64;
    let mut e = Estimate::from_counts(correct, test.len() as u64);
    e.chi_square = chi_square(&samples);
    r.trials = e.samples;
    r.successes = correct;
    r.verdict = verdict(&e);
    r.estimate = Some(e);
    r.details = serde_json::json!({"feature_values": samples.iter().map(|s| &s.0).collect::<HashSet<_>>().len()});
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnlinkabilityConfig {
    pub samples: u64,
    /// RPs check PID_RP, so ω reaches them whenever it is a BL argument.
    pub checking: bool,
    pub honest_users: usize,
    pub colluders: usize,
    pub colluding_rps: usize,
    /// r-tuples per colluding user in the adversary's training data.
    pub supplementary: usize,
    pub seed: u64,
}

impl Default for UnlinkabilityConfig {
    fn default() -> Self {
        Self { samples: 10_000, checking: false, honest_users: 4, colluders: 3, colluding_rps: 3, supplementary: 20, seed: 0 }
    }
}

/// One r-tuple, flattened to named JSON values the adversary compares.
type View = BTreeMap<String, Value>;

struct Observer<'a, B: Oprf> {
    reg: &'a Registry<B>,
    checking: bool,
    known: Vec<B::Omega>,
}

impl<B: Oprf> Observer<'_, B> {
    fn tuple(&self, user: UserHandle, rp: RpHandle, rng: &mut ChaCha20Rng) -> Result<RTuple> {
        let b = self.reg.backend();
        let key = self.reg.idp_key(user)?;
        let x = &self.reg.rp(rp)?.x;
        let omega = if b.flags().has_omega { Some(b.gen_omega(key, rng)?) } else { None };
        let t = b.random_blind(omega.as_ref(), rng)?;
        let x_prime = b.blind_with(x, &t, omega.as_ref())?;
        let z_prime = b.serve(key, &x_prime, omega.as_ref())?;
        Ok(rtuple_of(&**b, x, &x_prime, &z_prime, &t, omega.as_ref(), self.checking))
    }

    fn view(&self, user: UserHandle, rp: RpHandle, rng: &mut ChaCha20Rng) -> Result<View> {
        let b = self.reg.backend();
        let r = self.tuple(user, rp, rng)?;
        let mut v: View = r.fields.iter().map(|f| (f.name.clone(), f.value.clone())).collect();
        v.insert("public_params".into(), r.public_params.clone());
        let x = canon::from_value(r.get("x").expect("x"))?;
        let x_prime = canon::from_value(r.get("x_prime").expect("x'"))?;
        let t = canon::from_value(r.get("t").expect("t"))?;
        let restored = b.restore_bl_argument(&x, &x_prime, &t, &self.known).unwrap_or(Value::Null);
        v.insert("restored".into(), restored);
        Ok(v)
    }
}

/// Fields whose value is fixed per user and differs between users, as
/// judged from the colluders' own logins.
fn key_stable_fields(sets: &[Vec<View>]) -> Vec<String> {
    let Some(first) = sets.first().and_then(|s| s.first()) else { return Vec::new() };
    first
        .keys()
        .filter(|name| {
            let per_set: Option<Vec<&Value>> = sets
                .iter()
                .map(|s| {
                    let v = s[0].get(*name).filter(|v| !v.is_null())?;
                    s.iter().all(|t| t.get(*name) == Some(v)).then_some(v)
                })
                .collect();
            per_set
                .is_some_and(|vals| sets.len() >= 2 && vals.iter().enumerate().all(|(i, a)| vals[i + 1..].iter().all(|b| a != b)))
        })
        .cloned()
        .collect()
}

fn mask(a: &View, b: &View, fields: &[String]) -> Vec<bool> {
    fields.iter().map(|f| a.get(f) == b.get(f)).collect()
}

pub fn game_rp_unlinkability<B: Oprf>(b: Arc<B>, cfg: &UnlinkabilityConfig) -> Result<GameReport> {
    let game = if cfg.checking { "rp_unlinkability_checked" } else { "rp_unlinkability" };
    let mut r = GameReport::new(game, b.kind(), serde_json::to_value(cfg).expect("plain config"));
    r.scope = "key-stable field matching plus majority vote on field-equality masks, \
               trained on colluding users' logins"
        .into();
    if cfg.honest_users < 2 || cfg.colluding_rps < 2 {
        return Err(Error::Config("unlinkability needs two honest users and two colluding RPs".into()));
    }
    let reg = registry(b.clone(), cfg.honest_users + cfg.colluders, cfg.colluding_rps, cfg.seed, game)?;
    let users = reg.users();
    let (honest, colluders) = users.split_at(cfg.honest_users);
    let rps: Vec<RpHandle> = reg.rps().iter().map(|p| p.handle).collect();
    let mut rng = derive_rng(cfg.seed, game, u64::MAX - 1);
    let mut known = Vec::new();
    for u in colluders {
        if b.flags().has_omega {
            known.push(b.gen_omega(reg.idp_key(*u)?, &mut rng)?);
        }
    }
    let obs = Observer { reg: &reg, checking: cfg.checking, known };

    let sets: Vec<Vec<View>> = colluders
        .iter()
        .map(|u| (0..cfg.supplementary).map(|i| obs.view(*u, rps[i % rps.len()], &mut rng)).collect())
        .collect::<Result<_>>()?;
    let stable = key_stable_fields(&sets);
    let fields: Vec<String> = sets[0][0].keys().filter(|k| !stable.contains(k)).cloned().collect();

    // Training pairs: same colluder at two RPs, or two colluders.
    let mut clf = MajorityClassifier::default();
    for _ in 0..cfg.supplementary * sets.len() {
        let same = rng.gen::<bool>();
        let i = rng.gen_range(0..sets.len());
        let j = if same || sets.len() < 2 { i } else { (i + rng.gen_range(1..sets.len())) % sets.len() };
        let (a, c) = (&sets[i][rng.gen_range(0..sets[i].len())], &sets[j][rng.gen_range(0..sets[j].len())]);
        clf.train(mask(a, c, &fields), i == j);
    }

    let outcomes: Vec<(bool, bool)> = (0..cfg.samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = derive_rng(cfg.seed, game, s);
            let same = rng.gen::<bool>();
            let u0 = rng.gen_range(0..honest.len());
            let u1 = if same { u0 } else { (u0 + rng.gen_range(1..honest.len())) % honest.len() };
            let j0 = rng.gen_range(0..rps.len());
            let j1 = (j0 + rng.gen_range(1..rps.len())) % rps.len();
            let a = obs.view(honest[u0], rps[j0], &mut rng)?;
            let c = obs.view(honest[u1], rps[j1], &mut rng)?;
            let by_stable = stable.iter().find_map(|f| match (a.get(f), c.get(f)) {
                (Some(x), Some(y)) if !x.is_null() && !y.is_null() => Some(x == y),
                _ => None,
            });
            let guess = by_stable.unwrap_or_else(|| clf.predict(&mask(&a, &c, &fields)));
            Ok((guess == same, by_stable.is_some()))
        })
        .collect::<Result<_>>()?;
    let correct = outcomes.iter().filter(|o| o.0).count() as u64;
    let e = Estimate::from_counts(correct, cfg.samples);
    r.trials = cfg.samples;
    r.successes = correct;
    r.verdict = verdict(&e);
    r.estimate = Some(e);
    r.details = serde_json::json!({
        "key_stable_fields": stable,
        "decided_by_stable_field": outcomes.iter().filter(|o| o.1).count(),
        "compared_fields": fields,
    });
    Ok(r)
}
