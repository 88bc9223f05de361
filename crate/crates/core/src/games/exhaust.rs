//! Exhaustive checks on desk-size parameters: correctness of
//! UBL ∘ OPR ∘ BL and injectivity of k ↦ PR(k, x).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::oprf::Oprf;
use crate::params::derive_rng;

use super::{Cell, GameReport};

type Domain<B> = (Vec<<B as Oprf>::Key>, Vec<<B as Oprf>::Input>);

fn enumerations<B: Oprf>(b: &B) -> Result<Domain<B>> {
    match (b.small_keys(), b.small_inputs()) {
        (Some(k), Some(x)) => Ok((k, x)),
        _ => Err(Error::Unsupported(format!("{} parameters are too large to enumerate", b.kind()))),
    }
}

/// Every (k, x, invertible t): UBL(OPR(k, BL(x, t)), x, t) = PR(k, x).
/// Pairs where PR itself is undefined (DY_HE with k + x = 0) are skipped
/// and counted; a refused or wrong evaluation is a failure.
pub fn correctness_exhaustion<B: Oprf>(b: &B, seed: u64) -> Result<GameReport> {
    let (keys, inputs) = enumerations(b)?;
    let mut rng = derive_rng(seed, "correctness", 0);
    let (mut checked, mut failures, mut skipped) = (0u64, 0u64, 0u64);
    let mut witness = None;
    for key in &keys {
        let omega = if b.flags().has_omega { Some(b.gen_omega(key, &mut rng)?) } else { None };
        let blinds =
            b.small_blinds(omega.as_ref(), &mut rng).ok_or_else(|| Error::Unsupported("blinding space too large".into()))?;
        for x in &inputs {
            let expected = match b.evaluate(key, x) {
                Ok(v) => v,
                Err(Error::Degenerate(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            for t in &blinds {
                checked += 1;
                let got = b
                    .blind_with(x, t, omega.as_ref())
                    .and_then(|xp| b.serve(key, &xp, omega.as_ref()))
                    .and_then(|zp| b.unblind(&zp, x, t, omega.as_ref()));
                if got.as_ref().ok() != Some(&expected) {
                    failures += 1;
                    witness.get_or_insert_with(|| {
                        serde_json::json!({
                            "key": b.key_escrow(key),
                            "x": crate::canon::to_value(x),
                            "t": crate::canon::to_value(t),
                            "error": got.err().map(|e| e.to_string()),
                        })
                    });
                }
            }
        }
    }
    let mut r = GameReport::new("account_correctness", b.kind(), b.describe());
    r.trials = checked;
    r.successes = checked - failures;
    r.verdict = if failures == 0 && checked > 0 { Cell::Holds } else { Cell::Broken };
    r.scope = "exhaustive over keys, inputs and invertible blinding factors".into();
    r.witness = witness;
    r.details =
        serde_json::json!({"keys": keys.len(), "inputs": inputs.len(), "failures": failures, "skipped_degenerate": skipped});
    Ok(r)
}

/// Injectivity of k ↦ PR(k, x) for every registrable x. Backends that
/// hash an intermediate (2HashRSA) are checked on the hash input x^k,
/// since a small output range collides by pigeonhole regardless.
pub fn account_uniqueness<B: Oprf>(b: &B) -> Result<GameReport> {
    let keys = b.small_keys().ok_or_else(|| Error::Unsupported("key space too large".into()))?;
    let inputs = b.small_registrable_inputs().ok_or_else(|| Error::Unsupported("input space too large".into()))?;
    let mut pairs = 0u64;
    let mut witness = None;
    let mut collisions = 0u64;
    for x in &inputs {
        let mut seen: HashMap<serde_json::Value, &B::Key> = HashMap::new();
        for key in &keys {
            let image = match b.exposed_intermediate(key, x) {
                Some(v) => crate::canon::to_value(&v),
                None => match b.evaluate(key, x) {
                    Ok(v) => crate::canon::to_value(&v),
                    Err(Error::Degenerate(_)) => continue,
                    Err(e) => return Err(e),
                },
            };
            pairs += 1;
            if let Some(prev) = seen.get(&image) {
                collisions += 1;
                witness.get_or_insert_with(|| {
                    serde_json::json!({
                        "k_hat": b.key_escrow(prev),
                        "k_check": b.key_escrow(key),
                        "x": crate::canon::to_value(x),
                        "account": image,
                    })
                });
            } else {
                seen.insert(image, key);
            }
        }
    }
    let mut r = GameReport::new("account_uniqueness", b.kind(), b.describe());
    r.trials = pairs;
    r.successes = collisions;
    r.verdict = if collisions == 0 { Cell::Holds } else { Cell::Broken };
    r.scope = "exhaustive over keys and registrable inputs".into();
    r.witness = witness;
    r.details = serde_json::json!({"keys": keys.len(), "inputs": inputs.len()});
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupParams;
    use crate::oprf::{HashDh, NrHe};

    #[test]
    fn hashdh_desk_is_correct_and_injective() {
        let b = HashDh::new(GroupParams::<u64>::desk());
        let r = correctness_exhaustion(&b, 0).unwrap();
        assert_eq!((r.trials, r.verdict), (1000, Cell::Holds));
        let u = account_uniqueness(&b).unwrap();
        assert_eq!((u.trials, u.verdict), (100, Cell::Holds));
    }

    #[test]
    fn nr_he_collides() {
        let b = NrHe::new(GroupParams::<u64>::desk(), 2, 20).unwrap();
        let u = account_uniqueness(&b).unwrap();
        assert_eq!(u.verdict, Cell::Broken);
        let w = u.witness.unwrap();
        assert_ne!(w["k_hat"], w["k_check"]);
    }
}
