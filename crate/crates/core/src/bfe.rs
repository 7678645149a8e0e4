//! Estimation of `1^T A 1` for a symmetric nonnegative matrix.
//!
//! Rows are bucketed geometrically by row sum, `(1+beta)^(b-1) <= d < (1+beta)^b`.
//! A uniform row sample estimates the size of every bucket it hits often
//! enough to be declared large; mass that large rows send into the remaining
//! (small) buckets is measured by value-proportional resampling and counted
//! twice, once for each side of the symmetric matrix. The estimate is
//!
//! ```text
//! m_hat = (n / K) * sum_{b large} (1 + alpha_b) * |S_b| * (1+beta)^b
//! ```
//!
//! [`bfe`] removes the need for a lower bound `ell` on the answer by trying
//! `ell = rho n^2, rho n^2 / 2, ...` until the estimate clears `ell`.

use num_bigint::BigUint;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::BitRange;
use crate::oracle::{InnerProductOracle, OracleError, QueryCounter};
use crate::params::{Epsilon, ParamError};
use crate::randomness::RandomSource;
use crate::regr::{regr, RegrError};

/// Default multiplier on the row-sample size formula.
pub const DEFAULT_C_K: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BfeError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("beta = {beta} must lie in (0, epsilon/8 = {limit}]")]
    BetaOutOfRange { beta: String, limit: String },
    #[error("sample-size constant must be positive and finite")]
    BadSampleConstant,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Regr(#[from] RegrError),
}

/// Exact bucket boundaries `ceil((1+beta)^b)`, grown on demand.
///
/// For an integer `d`, `(1+beta)^b <= d` iff `ceil((1+beta)^b) <= d`, so the
/// table decides bucket membership without rounding error.
#[derive(Debug, Clone)]
pub struct BucketScale {
    beta: Ratio<u64>,
    growth_num: BigUint,
    growth_den: BigUint,
    num: BigUint,
    den: BigUint,
    thresholds: Vec<u64>,
}

impl BucketScale {
    pub fn new(beta: Ratio<u64>) -> Self {
        assert!(*beta.numer() > 0, "beta must be positive");
        let q = BigUint::from(*beta.denom());
        let p = BigUint::from(*beta.numer());
        Self {
            beta,
            growth_num: &q + &p,
            growth_den: q,
            num: BigUint::from(1u32),
            den: BigUint::from(1u32),
            thresholds: vec![1],
        }
    }

    pub fn beta(&self) -> Ratio<u64> {
        self.beta
    }

    fn push_next(&mut self) {
        self.num *= &self.growth_num;
        self.den *= &self.growth_den;
        let c = (&self.num + &self.den - 1u32) / &self.den;
        self.thresholds.push(u64::try_from(c).unwrap_or(u64::MAX));
    }

    /// Bucket `b >= 1` with `(1+beta)^(b-1) <= d < (1+beta)^b`, or 0 when
    /// `d == 0`.
    pub fn index(&mut self, d: u64) -> usize {
        if d == 0 {
            return 0;
        }
        while *self.thresholds.last().unwrap() <= d && *self.thresholds.last().unwrap() < u64::MAX {
            self.push_next();
        }
        self.thresholds.partition_point(|&c| c <= d)
    }

    /// `ceil(log_{1+beta}(x))` for `x >= 1`.
    pub fn ceil_log(&mut self, x: u64) -> usize {
        assert!(x >= 1);
        while *self.thresholds.last().unwrap() < x {
            self.push_next();
        }
        self.thresholds.partition_point(|&c| c < x)
    }

    /// `(1+beta)^b` in floating point, for the estimate only.
    pub fn upper_edge(&self, b: usize) -> f64 {
        let beta = *self.beta.numer() as f64 / *self.beta.denom() as f64;
        (1.0 + beta).powi(b as i32)
    }
}

/// Bucket of a single row sum.
pub fn bucket_index(d: u64, beta: Ratio<u64>) -> usize {
    BucketScale::new(beta).index(d)
}

/// Geometry and thresholds for one run with lower bound `ell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketConfig {
    pub beta: f64,
    /// `ceil(log_{1+beta}(rho n)) + 1`
    pub t: usize,
    /// Large-bucket threshold on `|B_i| / n`.
    pub theta: f64,
    /// Threshold on `|S_i| / K` for declaring a bucket large.
    pub classify_threshold: f64,
}

impl BucketConfig {
    pub fn new(scale: &mut BucketScale, epsilon: Epsilon, rho: u64, n: usize, ell: u64) -> Self {
        let t = scale.ceil_log(rho.saturating_mul(n as u64).max(1)) + 1;
        let eps = epsilon.as_f64();
        let base = 1.0 / t as f64 / n as f64;
        let ratio = ell as f64 / rho as f64;
        Self {
            beta: *scale.beta().numer() as f64 / *scale.beta().denom() as f64,
            t,
            theta: base * (eps / 8.0 * ratio).sqrt(),
            classify_threshold: base * (eps / 6.0 * ratio).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfeConfig {
    /// Multiplier `c_K` on the row-sample size.
    pub c_k: f64,
    /// Bucket growth; `None` means `epsilon / 8`.
    pub beta: Option<Ratio<u64>>,
    /// Read every row sum instead of sampling when the sample would be at
    /// least `n ln n` rows.
    pub exact_fallback: bool,
}

impl Default for BfeConfig {
    fn default() -> Self {
        Self {
            c_k: DEFAULT_C_K,
            beta: None,
            exact_fallback: true,
        }
    }
}

impl BfeConfig {
    fn beta_for(&self, epsilon: Epsilon) -> Result<Ratio<u64>, BfeError> {
        let limit = epsilon.ratio() / 8;
        let beta = self.beta.unwrap_or(limit);
        if *beta.numer() == 0 || beta > limit {
            return Err(BfeError::BetaOutOfRange {
                beta: beta.to_string(),
                limit: limit.to_string(),
            });
        }
        Ok(beta)
    }
}

/// `K = c_K * sqrt(rho) n / sqrt(ell) * eps^-4.5 * ln^2(rho n) * ln(1/eps)`,
/// at least 1.
pub fn sample_size(c_k: f64, rho: u64, n: usize, ell: u64, epsilon: Epsilon) -> u64 {
    let eps = epsilon.as_f64();
    let rn = rho as f64 * n as f64;
    let k = c_k * (rho as f64).sqrt() * n as f64 / (ell.max(1) as f64).sqrt()
        * eps.powf(-4.5)
        * rn.ln().powi(2)
        * (1.0 / eps).ln();
    if k.is_finite() {
        (k.ceil() as u64).max(1)
    } else {
        u64::MAX
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStat {
    pub bucket: usize,
    pub samples: u64,
    /// Resamples whose column landed in a small bucket.
    pub cross_hits: u64,
    pub alpha_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    /// Row-sample size `K` of the final phase.
    pub sample_size: u64,
    pub buckets: Option<BucketConfig>,
    pub large_buckets: Vec<BucketStat>,
    /// Rows sampled with zero row sum.
    pub zero_rows: u64,
    /// The answer was computed by reading every row sum.
    pub exact_fallback: bool,
    /// Lower-bound phases run (1 for a direct call).
    pub phases: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub epsilon: f64,
    pub lower_bound_used: u64,
    pub queries: QueryCounter,
    pub seed: Option<u64>,
    pub meta: TrialMeta,
}

impl Estimate {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Whether the value lies in `[(1-eps) exact, (1+eps) exact]`.
    pub fn within(&self, exact: f64, eps: f64) -> bool {
        self.value >= (1.0 - eps) * exact && self.value <= (1.0 + eps) * exact
    }
}

fn exact_scan<O: InnerProductOracle + ?Sized>(oracle: &O) -> Result<u64, OracleError> {
    let mut total = 0u64;
    for i in 0..oracle.n() {
        total = total
            .checked_add(oracle.row_sum(i)?)
            .ok_or(OracleError::Overflow)?;
    }
    Ok(total)
}

/// One run with a known lower bound `ell <= 1^T A 1`. The oracle must wrap a
/// symmetric matrix.
pub fn bfe_with_lower_bound<O, R>(
    oracle: &O,
    ell: u64,
    epsilon: Epsilon,
    rng: &mut R,
    cfg: &BfeConfig,
) -> Result<Estimate, BfeError>
where
    O: InnerProductOracle + ?Sized,
    R: RandomSource + ?Sized,
{
    epsilon.ensure_below(Ratio::new(1, 2))?;
    if !(cfg.c_k.is_finite() && cfg.c_k > 0.0) {
        return Err(BfeError::BadSampleConstant);
    }
    let ell = ell.max(1);
    let start = oracle.counter();
    let n = oracle.n();
    let rho = oracle.rho();
    let mut scale = BucketScale::new(cfg.beta_for(epsilon)?);
    let buckets = BucketConfig::new(&mut scale, epsilon, rho, n, ell);
    let k = sample_size(cfg.c_k, rho, n, ell, epsilon);

    let mut meta = TrialMeta {
        sample_size: k,
        buckets: Some(buckets.clone()),
        large_buckets: Vec::new(),
        zero_rows: 0,
        exact_fallback: false,
        phases: 1,
    };

    if cfg.exact_fallback && k as f64 >= n as f64 * (n as f64).ln() {
        let total = exact_scan(oracle)?;
        meta.exact_fallback = true;
        return Ok(Estimate {
            value: total as f64,
            epsilon: epsilon.as_f64(),
            lower_bound_used: ell,
            queries: oracle.counter().since(&start),
            seed: None,
            meta,
        });
    }

    // Step 1: sample K rows with replacement and bucket them by row sum.
    let mut members: Vec<Vec<usize>> = Vec::new();
    for _ in 0..k {
        let row = rng.uniform_index(n);
        let b = scale.index(oracle.row_sum(row)?);
        if b == 0 {
            meta.zero_rows += 1;
            continue;
        }
        if members.len() <= b {
            members.resize_with(b + 1, Vec::new);
        }
        members[b].push(row);
    }

    // Step 2: buckets holding a large enough share of the sample.
    let large: Vec<bool> = members
        .iter()
        .map(|s| !s.is_empty() && s.len() as f64 / k as f64 >= buckets.classify_threshold)
        .collect();
    let is_large = |b: usize| b < large.len() && large[b];

    // Step 3: for each large bucket, the share of its mass sent to small
    // buckets. Each resample's column costs one extra row-sum query.
    let full = BitRange::full(n);
    let mut value = 0.0;
    for (b, rows) in members.iter().enumerate() {
        if !is_large(b) {
            continue;
        }
        let mut hits = 0u64;
        for _ in 0..rows.len() {
            let z = rows[rng.uniform_index(rows.len())];
            let entry = regr(oracle, z, full, rng)?;
            let target = scale.index(oracle.row_sum(entry.col)?);
            if target != 0 && !is_large(target) {
                hits += 1;
            }
        }
        let size = rows.len() as u64;
        meta.large_buckets.push(BucketStat {
            bucket: b,
            samples: size,
            cross_hits: hits,
            alpha_tilde: hits as f64 / size as f64,
        });
        // (1 + alpha) |S_b| = |S_b| + hits
        value += (size + hits) as f64 * scale.upper_edge(b);
    }
    value *= n as f64 / k as f64;

    Ok(Estimate {
        value,
        epsilon: epsilon.as_f64(),
        lower_bound_used: ell,
        queries: oracle.counter().since(&start),
        seed: None,
        meta,
    })
}

/// Full estimator: geometric search over the lower bound, starting at
/// `rho n^2` and halving until an estimate reaches its own lower bound.
/// `queries` covers every phase.
pub fn bfe<O, R>(
    oracle: &O,
    epsilon: Epsilon,
    rng: &mut R,
    cfg: &BfeConfig,
) -> Result<Estimate, BfeError>
where
    O: InnerProductOracle + ?Sized,
    R: RandomSource + ?Sized,
{
    let start = oracle.counter();
    let n = oracle.n() as u128;
    let top = u128::from(oracle.rho()) * n * n;
    let mut phases = 0u32;
    for shift in 0..u128::BITS {
        let ell = u64::try_from((top >> shift).max(1)).unwrap_or(u64::MAX);
        let mut est = bfe_with_lower_bound(oracle, ell, epsilon, rng, cfg)?;
        phases += 1;
        if est.meta.exact_fallback {
            // The exact total decides every remaining phase without queries.
            let exact = est.value as u128;
            let accepted = (shift..u128::BITS)
                .map(|s| (top >> s).max(1))
                .find(|&l| l <= exact || l == 1)
                .unwrap_or(1);
            est.lower_bound_used = u64::try_from(accepted).unwrap_or(u64::MAX);
        }
        if est.meta.exact_fallback || est.value >= ell as f64 || ell == 1 {
            est.queries = oracle.counter().since(&start);
            est.meta.phases = phases;
            return Ok(est);
        }
    }
    unreachable!("the lower bound reaches 1 within 128 halvings")
}
