//! Empirical distribution helpers for checking samplers.

use std::collections::BTreeMap;

/// Counts of observed outcomes.
#[derive(Debug, Clone)]
pub struct Tally<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> Default for Tally<K> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord> Tally<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, k: K) {
        *self.counts.entry(k).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<K, u64> {
        &self.counts
    }

    pub fn count(&self, k: &K) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn frequency(&self, k: &K) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(k) as f64 / self.total as f64
        }
    }

    /// Total variation distance to `expected`; outcomes missing from either
    /// side count as probability zero.
    pub fn tv_distance(&self, expected: &BTreeMap<K, f64>) -> f64 {
        let mut sum = 0.0;
        for (k, p) in expected {
            sum += (self.frequency(k) - p).abs();
        }
        for k in self.counts.keys() {
            if !expected.contains_key(k) {
                sum += self.frequency(k);
            }
        }
        sum / 2.0
    }

    /// Pearson statistic against `expected` with its degrees of freedom
    /// (support size minus one). Observations outside the support make the
    /// statistic infinite.
    pub fn chi_square(&self, expected: &BTreeMap<K, f64>) -> ChiSquare {
        let n = self.total as f64;
        let mut statistic = 0.0;
        let mut cells = 0usize;
        for (k, &p) in expected {
            if p <= 0.0 {
                continue;
            }
            cells += 1;
            let e = n * p;
            let d = self.count(k) as f64 - e;
            statistic += d * d / e;
        }
        let outside = self
            .counts
            .keys()
            .any(|k| expected.get(k).is_none_or(|&p| p <= 0.0));
        if outside {
            statistic = f64::INFINITY;
        }
        ChiSquare {
            statistic,
            df: cells.saturating_sub(1),
        }
    }
}

impl<K: Ord> FromIterator<K> for Tally<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut t = Self::new();
        for k in iter {
            t.add(k);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
}

impl ChiSquare {
    /// Wilson-Hilferty approximation of the upper quantile of the chi-square
    /// distribution at standard normal score `z` (3.09 for 0.001).
    pub fn critical_value(df: usize, z: f64) -> f64 {
        if df == 0 {
            return 0.0;
        }
        let k = df as f64;
        let h = 2.0 / (9.0 * k);
        k * (1.0 - h + z * h.sqrt()).powi(3)
    }

    pub fn rejects_at(&self, z: f64) -> bool {
        self.statistic > Self::critical_value(self.df, z)
    }
}

/// `0.5 * sum |p - q|` over the union of supports.
pub fn tv_distance<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, a) in p {
        sum += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            sum += b;
        }
    }
    sum / 2.0
}
