//! Distinguisher statistics: Wilson intervals on accuracy, advantage
//! 2·acc − 1, and a chi-square independence test.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub const CONFIDENCE: f64 = 0.99;

/// Buckets for the chi-square contingency table.
const CHI_BUCKETS: u64 = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub samples: u64,
    pub correct: u64,
    pub accuracy: f64,
    /// Signed, 2·accuracy − 1, so the interval can straddle 0.
    pub advantage: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub chi_square: Option<ChiSquare>,
}

impl Estimate {
    pub fn from_counts(correct: u64, samples: u64) -> Self {
        let (lo, hi) = wilson(correct, samples, CONFIDENCE);
        let accuracy = if samples == 0 { 0.5 } else { correct as f64 / samples as f64 };
        Self {
            samples,
            correct,
            accuracy,
            advantage: 2.0 * accuracy - 1.0,
            ci_low: 2.0 * lo - 1.0,
            ci_high: 2.0 * hi - 1.0,
            confidence: CONFIDENCE,
            chi_square: None,
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson(successes: u64, n: u64, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + confidence / 2.0);
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn bucket<K: Hash>(key: &K) -> u64 {
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    h.finish() % CHI_BUCKETS
}

/// Chi-square test of independence between a (hashed) feature and a
/// binary label. `None` when fewer than two feature buckets occur.
pub fn chi_square<K: Hash>(samples: &[(K, bool)]) -> Option<ChiSquare> {
    let mut table: HashMap<u64, [u64; 2]> = HashMap::new();
    for (k, label) in samples {
        table.entry(bucket(k)).or_default()[usize::from(*label)] += 1;
    }
    let cols = [0, 1].map(|c| table.values().map(|r| r[c]).sum::<u64>());
    if table.len() < 2 || cols.contains(&0) {
        return None;
    }
    let total = (cols[0] + cols[1]) as f64;
    let mut statistic = 0.0;
    for row in table.values() {
        let row_total = (row[0] + row[1]) as f64;
        for c in 0..2 {
            let expected = row_total * cols[c] as f64 / total;
            statistic += (row[c] as f64 - expected).powi(2) / expected;
        }
    }
    let dof = table.len() as u64 - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).ok()?.cdf(statistic);
    Some(ChiSquare { statistic, dof, p_value })
}

/// Majority vote per exact feature value; unseen values and ties guess
/// `false`.
#[derive(Debug)]
pub struct MajorityClassifier<K: Hash + Eq> {
    counts: HashMap<K, [u64; 2]>,
}

impl<K: Hash + Eq> Default for MajorityClassifier<K> {
    fn default() -> Self {
        Self { counts: HashMap::new() }
    }
}

impl<K: Hash + Eq> MajorityClassifier<K> {
    pub fn train(&mut self, key: K, label: bool) {
        self.counts.entry(key).or_default()[usize::from(label)] += 1;
    }

    pub fn predict(&self, key: &K) -> bool {
        self.counts.get(key).is_some_and(|c| c[1] > c[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 50/100 at 95%: 0.4038, 0.5962.
        let (lo, hi) = wilson(50, 100, 0.95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson(0, 10, 0.99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.3 && hi < 0.5);
    }

    #[test]
    fn perfect_accuracy_excludes_zero() {
        let e = Estimate::from_counts(10_000, 10_000);
        assert_eq!(e.advantage, 1.0);
        assert!(!e.contains_zero());
        assert!(Estimate::from_counts(5_010, 10_000).contains_zero());
    }

    #[test]
    fn chi_square_detects_dependence() {
        let dependent: Vec<(u64, bool)> = (0..1000).map(|i| (i % 2, i % 2 == 0)).collect();
        assert!(chi_square(&dependent).unwrap().p_value < 1e-6);
        let independent: Vec<(u64, bool)> = (0..1000).map(|i| (i % 7, i % 2 == 0)).collect();
        assert!(chi_square(&independent).unwrap().p_value > 0.01);
        assert!(chi_square(&[(1u64, true), (1, false)]).is_none());
    }

    #[test]
    fn majority_vote() {
        let mut c = MajorityClassifier::default();
        c.train("a", true);
        c.train("a", true);
        c.train("a", false);
        c.train("b", false);
        assert!(c.predict(&"a"));
        assert!(!c.predict(&"b"));
        assert!(!c.predict(&"z"));
    }
}
