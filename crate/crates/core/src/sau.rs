//! Almost-uniform sampling of entries of a symmetric nonnegative matrix:
//! emit `A_ij` with probability within `(1 +- eps)` of `A_ij / 1^T A 1`.
//!
//! A row is light when its sum is at most `tau`, heavy otherwise. One attempt
//! flips a fair coin and runs either
//!
//! - [`sample_light`]: uniform row `r`; if light, keep it with probability
//!   `d_r / tau` and sample an entry of it. Each light entry comes out with
//!   probability exactly `A_ij / (n tau)`.
//! - [`sample_heavy`]: the same walk to an entry `A_rs` of a light row, then,
//!   if row `s` is heavy, an entry of row `s`. A heavy entry comes out with
//!   probability `A_ij / (n tau) * (mass of row i on light columns) / d_i`,
//!   which is at least `(1 - rho m_hat / tau^2) A_ij / (n tau)`.
//!
//! With `tau >= sqrt(rho m_hat / eps)` the two halves agree to within
//! `1 - eps`, so the law conditioned on success is within `(1 +- eps)` of
//! uniform over the mass.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bfe::{bfe, BfeConfig, BfeError};
use crate::matrix::BitRange;
use crate::oracle::{InnerProductOracle, OracleError, QueryCounter};
use crate::params::{Epsilon, ParamError};
use crate::randomness::RandomSource;
use crate::regr::{regr, EntrySample, RegrError};

pub const DEFAULT_C_GAMMA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SauError {
    #[error("the matrix has no positive entries")]
    AllZeroMatrix,
    #[error("no sample after {attempts} attempts")]
    Exhausted { attempts: u64 },
    #[error("tau must be at least 1")]
    ZeroTau,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("rough estimate failed: {0}")]
    Bfe(#[from] BfeError),
    #[error(transparent)]
    Regr(#[from] RegrError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Light/heavy threshold and attempt budget for one sampling session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SauConfig {
    /// Integer threshold, the least integer with `tau^2 >= rho m_hat / eps`.
    pub tau: u64,
    /// Rough total with `m <= m_hat <= 2m` (when the rough estimate is good).
    pub m_hat: f64,
    /// Attempts per sample.
    pub gamma: u64,
    pub epsilon: f64,
}

impl SauConfig {
    pub fn from_m_hat(n: usize, rho: u64, m_hat: f64, epsilon: Epsilon, c_gamma: f64) -> Self {
        let eps = epsilon.as_f64();
        let target = rho as f64 * m_hat / eps;
        let mut tau = target.sqrt().ceil().max(1.0) as u64;
        while (tau as f64) * (tau as f64) < target {
            tau += 1;
        }
        let nf = n as f64;
        let gamma = c_gamma * nf * (rho as f64).sqrt() / ((1.0 - eps) * (eps * m_hat).sqrt())
            * nf.ln().max(1.0);
        Self {
            tau,
            m_hat,
            gamma: if gamma.is_finite() {
                gamma.ceil().max(1.0) as u64
            } else {
                u64::MAX
            },
            epsilon: eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SauSettings {
    pub c_gamma: f64,
    /// Configuration of the rough-estimate run.
    pub bfe: BfeConfig,
}

impl Default for SauSettings {
    fn default() -> Self {
        Self {
            c_gamma: DEFAULT_C_GAMMA,
            bfe: BfeConfig::default(),
        }
    }
}

/// Whether a row with sum `d` is light.
#[inline]
pub fn is_light(d: u64, tau: u64) -> bool {
    d <= tau
}

/// One light-row attempt. `None` is a normal failure.
pub fn sample_light<O, R>(
    oracle: &O,
    tau: u64,
    rng: &mut R,
) -> Result<Option<EntrySample>, RegrError>
where
    O: InnerProductOracle + ?Sized,
    R: RandomSource + ?Sized,
{
    assert!(tau > 0, "tau must be positive");
    let n = oracle.n();
    let r = rng.uniform_index(n);
    let d = oracle.row_sum(r)?;
    if !is_light(d, tau) || !rng.bernoulli(d, tau) {
        return Ok(None);
    }
    regr(oracle, r, BitRange::full(n), rng).map(Some)
}

/// One heavy-row attempt: a light row's entry points to a column; if that
/// column's row is heavy, sample from it. Requires a symmetric matrix.
pub fn sample_heavy<O, R>(
    oracle: &O,
    tau: u64,
    rng: &mut R,
) -> Result<Option<EntrySample>, RegrError>
where
    O: InnerProductOracle + ?Sized,
    R: RandomSource + ?Sized,
{
    assert!(tau > 0, "tau must be positive");
    let n = oracle.n();
    let full = BitRange::full(n);
    let r = rng.uniform_index(n);
    let d = oracle.row_sum(r)?;
    if !is_light(d, tau) || !rng.bernoulli(d, tau) {
        return Ok(None);
    }
    let step = regr(oracle, r, full, rng)?;
    let s = step.col;
    if is_light(oracle.row_sum(s)?, tau) {
        return Ok(None);
    }
    regr(oracle, s, full, rng).map(Some)
}

/// A prepared sampler: the rough estimate is taken once and reused for any
/// number of samples.
#[derive(Debug, Clone)]
pub struct SauSampler {
    config: SauConfig,
    setup_queries: QueryCounter,
}

impl SauSampler {
    /// Takes a rough estimate with accuracy 1/3 and sets `m_hat` to 3/2 of it,
    /// so that `m <= m_hat <= 2m` whenever the estimate is within `(1 +- 1/3) m`.
    pub fn prepare<O, R>(
        oracle: &O,
        epsilon: Epsilon,
        rng: &mut R,
        settings: &SauSettings,
    ) -> Result<Self, SauError>
    where
        O: InnerProductOracle + ?Sized,
        R: RandomSource + ?Sized,
    {
        let start = oracle.counter();
        let rough = bfe(
            oracle,
            Epsilon::from_ratio(Ratio::new(1, 3))?,
            rng,
            &settings.bfe,
        )?;
        if rough.value <= 0.0 {
            return Err(SauError::AllZeroMatrix);
        }
        let m_hat = 1.5 * rough.value;
        Ok(Self {
            config: SauConfig::from_m_hat(
                oracle.n(),
                oracle.rho(),
                m_hat,
                epsilon,
                settings.c_gamma,
            ),
            setup_queries: oracle.counter().since(&start),
        })
    }

    pub fn from_config(config: SauConfig) -> Result<Self, SauError> {
        if config.tau == 0 {
            return Err(SauError::ZeroTau);
        }
        Ok(Self {
            config,
            setup_queries: QueryCounter::default(),
        })
    }

    pub fn config(&self) -> &SauConfig {
        &self.config
    }

    /// Queries spent on the rough estimate.
    pub fn setup_queries(&self) -> QueryCounter {
        self.setup_queries
    }

    /// One attempt: a fair coin picks the light or the heavy sampler.
    pub fn attempt<O, R>(&self, oracle: &O, rng: &mut R) -> Result<Option<EntrySample>, SauError>
    where
        O: InnerProductOracle + ?Sized,
        R: RandomSource + ?Sized,
    {
        let out = if rng.bernoulli(1, 2) {
            sample_light(oracle, self.config.tau, rng)?
        } else {
            sample_heavy(oracle, self.config.tau, rng)?
        };
        Ok(out)
    }

    /// Up to `gamma` attempts; the first success is returned.
    pub fn sample<O, R>(&self, oracle: &O, rng: &mut R) -> Result<EntrySample, SauError>
    where
        O: InnerProductOracle + ?Sized,
        R: RandomSource + ?Sized,
    {
        for _ in 0..self.config.gamma {
            if let Some(s) = self.attempt(oracle, rng)? {
                return Ok(s);
            }
        }
        Err(SauError::Exhausted {
            attempts: self.config.gamma,
        })
    }
}

/// A single almost-uniform sample, including the rough estimate.
pub fn sau<O, R>(
    oracle: &O,
    epsilon: Epsilon,
    rng: &mut R,
    settings: &SauSettings,
) -> Result<EntrySample, SauError>
where
    O: InnerProductOracle + ?Sized,
    R: RandomSource + ?Sized,
{
    SauSampler::prepare(oracle, epsilon, rng, settings)?.sample(oracle, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::oracle::PrefixOracle;
    use crate::randomness::enumerate_law;
    use crate::regr::query_budget;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture4() -> Matrix {
        Matrix::from_rows(
            5,
            &[
                vec![1, 3, 0, 2],
                vec![3, 0, 5, 0],
                vec![0, 5, 2, 1],
                vec![2, 0, 1, 4],
            ],
        )
        .unwrap()
    }

    fn q(num: i64, den: i64) -> BigRational {
        BigRational::new(num.into(), den.into())
    }

    fn entry(row: usize, col: usize, value: u64) -> Option<EntrySample> {
        Some(EntrySample { row, col, value })
    }

    #[test]
    fn light_law_on_fixture() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        let law = enumerate_law(|e| sample_light(&o, 10, e).unwrap());
        assert_eq!(law[&entry(0, 1, 3)], q(3, 40));
        let success: BigRational = law
            .iter()
            .filter(|(k, _)| k.is_some())
            .map(|(_, p)| p.clone())
            .sum();
        assert_eq!(success, q(29, 40));
        assert_eq!(law[&None], q(11, 40));
    }

    #[test]
    fn heavy_law_on_fixture() {
        // rows 1 and 2 (sum 8) are heavy at tau = 7; rows 0 and 3 are light
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        let law = enumerate_law(|e| sample_heavy(&o, 7, e).unwrap());
        assert_eq!(law[&entry(1, 2, 5)], q(15, 224));
        assert!(law.keys().flatten().all(|s| s.row == 1 || s.row == 2));
    }

    #[test]
    fn degenerate_thresholds() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        // every row heavy: light sampler never succeeds
        let law = enumerate_law(|e| sample_light(&o, 5, e).unwrap());
        assert_eq!(law.len(), 1);
        assert!(law.contains_key(&None));
        // every row light: heavy sampler never succeeds
        let law = enumerate_law(|e| sample_heavy(&o, 100, e).unwrap());
        assert_eq!(law.len(), 1);

        let z = PrefixOracle::preprocess(&Matrix::zeros(5, 2).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_light(&z, 3, &mut rng).unwrap(), None);
            assert_eq!(sample_heavy(&z, 3, &mut rng).unwrap(), None);
        }
        assert_eq!(
            sau(
                &z,
                "0.25".parse().unwrap(),
                &mut rng,
                &SauSettings::default()
            ),
            Err(SauError::AllZeroMatrix)
        );
    }

    #[test]
    fn first_picked_heavy_row_fails_immediately() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        let law = enumerate_law(|e| {
            let before = o.read_counter().total();
            let out = sample_heavy(&o, 7, e).unwrap();
            (out, o.read_counter().total() - before)
        });
        // rows 1 and 2 are picked with probability 1/2 and cost one query
        let immediate: BigRational = law
            .iter()
            .filter(|((out, cost), _)| out.is_none() && *cost == 1)
            .map(|(_, p)| p.clone())
            .sum();
        assert!(immediate >= q(1, 2));
    }

    #[test]
    fn per_call_query_budgets() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        let per_regr = query_budget(4);
        for tau in [5, 7, 8, 10] {
            enumerate_law(|e| {
                let before = o.read_counter().total();
                sample_light(&o, tau, e).unwrap();
                assert!(o.read_counter().total() - before <= 1 + per_regr);
                let before = o.read_counter().total();
                sample_heavy(&o, tau, e).unwrap();
                assert!(o.read_counter().total() - before <= 2 + 2 * per_regr);
            });
        }
    }

    #[test]
    fn config_sizing() {
        let eps: Epsilon = "0.25".parse().unwrap();
        let cfg = SauConfig::from_m_hat(4, 5, 43.5, eps, 4.0);
        // 5 * 43.5 / 0.25 = 870, sqrt = 29.49
        assert_eq!(cfg.tau, 30);
        let expected = 4.0 * 4.0 * 5f64.sqrt() / (0.75 * (0.25f64 * 43.5).sqrt()) * 4f64.ln();
        assert_eq!(cfg.gamma, expected.ceil() as u64);
        // exact square stays put: 1 * 16 / (1/4) = 64
        assert_eq!(SauConfig::from_m_hat(4, 1, 16.0, eps, 4.0).tau, 8);
    }

    #[test]
    fn single_entry_matrix() {
        let o = PrefixOracle::preprocess(&Matrix::from_rows(5, &[vec![5]]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sampler = SauSampler::prepare(
            &o,
            "0.25".parse().unwrap(),
            &mut rng,
            &SauSettings::default(),
        )
        .unwrap();
        let mut got = 0;
        for _ in 0..200 {
            match sampler.sample(&o, &mut rng) {
                Ok(s) => {
                    assert_eq!(
                        s,
                        EntrySample {
                            row: 0,
                            col: 0,
                            value: 5
                        }
                    );
                    got += 1;
                }
                Err(SauError::Exhausted { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(got > 100);
    }

    #[test]
    fn prepared_sampler_is_deterministic() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SauSampler::prepare(
                &o,
                "0.25".parse().unwrap(),
                &mut rng,
                &SauSettings::default(),
            )
            .unwrap();
            (0..20)
                .map(|_| s.sample(&o, &mut rng).ok())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }
}
