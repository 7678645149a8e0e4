//! Reductions from arbitrary `x^T A y` to the symmetric all-ones case by
//! simulating oracles over derived matrices.
//!
//! - Weighted: `C_ij = x_i A_ij y_j`, so `1^T C 1 = x^T A y`. A query on `C`
//!   is one weighted query on `A`: `<C_{k*}, a> = <A_{k*}, a'>` with
//!   `a'_i = x_k a_i y_i` (columns: `a'_i = x_i a_i y_k`).
//! - Symmetrize: `A + A^T`, integral and symmetric. A row query costs one row
//!   and one column query on the base.
//!
//! Stacking both gives `D = C + C^T` with `1^T D 1 = 2 x^T A y`.

use thiserror::Error;

use crate::bfe::{bfe, BfeConfig, BfeError, Estimate};
use crate::matrix::{check_bilinear_bound, BitRange, MatrixError, WeightVector};
use crate::oracle::{
    check_index, check_range, check_vector, Counters, InnerProductOracle, OracleError, QueryCounter,
};
use crate::params::Epsilon;
use crate::randomness::RandomSource;
use crate::regr::EntrySample;
use crate::sau::{SauError, SauSampler, SauSettings};

#[derive(Debug, Error)]
pub enum GeneralError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Bfe(#[from] BfeError),
    #[error(transparent)]
    Sau(#[from] SauError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimulationMode {
    /// Serves `A + A^T`.
    Symmetrize,
    /// Serves `C` with `C_ij = x_i A_ij y_j`.
    Weighted { x: Vec<u64>, y: Vec<u64> },
}

/// An oracle over a matrix derived from `base`. Every simulated query is paid
/// for by base queries; [`InnerProductOracle::counter`] reports the base
/// count and [`SimulatedOracle::simulated_counter`] the simulated one.
#[derive(Debug)]
pub struct SimulatedOracle<O> {
    base: O,
    mode: SimulationMode,
    rho: u64,
    counters: Counters,
}

impl<O: InnerProductOracle> SimulatedOracle<O> {
    pub fn symmetrize(base: O) -> Result<Self, OracleError> {
        let rho = base.rho().checked_mul(2).ok_or(OracleError::Overflow)?;
        rho.checked_mul(base.n() as u64)
            .ok_or(OracleError::Overflow)?;
        Ok(Self {
            base,
            mode: SimulationMode::Symmetrize,
            rho,
            counters: Counters::default(),
        })
    }

    pub fn weighted(base: O, x: &WeightVector, y: &WeightVector) -> Result<Self, GeneralError> {
        let n = base.n();
        for v in [x, y] {
            if v.n() != n {
                return Err(MatrixError::DimensionMismatch {
                    left: n,
                    right: v.n(),
                }
                .into());
            }
        }
        // Row sums of C are at most rho gx gy n.
        check_bilinear_bound(base.rho(), x.gamma(), y.gamma(), n)?;
        let rho = base.rho() * x.gamma() * y.gamma();
        Ok(Self {
            base,
            mode: SimulationMode::Weighted {
                x: x.values().to_vec(),
                y: y.values().to_vec(),
            },
            rho,
            counters: Counters::default(),
        })
    }

    pub fn base(&self) -> &O {
        &self.base
    }

    pub fn mode(&self) -> &SimulationMode {
        &self.mode
    }

    /// Queries answered at this level.
    pub fn simulated_counter(&self) -> QueryCounter {
        self.counters.snapshot()
    }

    fn scaled(
        &self,
        fixed: u64,
        a: impl Iterator<Item = u64>,
        w: &[u64],
    ) -> Result<Vec<u64>, OracleError> {
        a.zip(w)
            .map(|(ai, &wi)| {
                fixed
                    .checked_mul(ai)
                    .and_then(|v| v.checked_mul(wi))
                    .ok_or(OracleError::Overflow)
            })
            .collect()
    }

    fn row_query(&self, i: usize, v: Query<'_>) -> Result<u64, OracleError> {
        match &self.mode {
            SimulationMode::Symmetrize => {
                let (a, b) = match v {
                    Query::Range(r) => {
                        (self.base.row_ip_range(i, r)?, self.base.col_ip_range(i, r)?)
                    }
                    Query::Vector(v) => (
                        self.base.row_ip_weighted(i, v)?,
                        self.base.col_ip_weighted(i, v)?,
                    ),
                };
                a.checked_add(b).ok_or(OracleError::Overflow)
            }
            SimulationMode::Weighted { x, y } => {
                let scaled = self.scaled(x[i], v.values(self.base.n()), y)?;
                self.base.row_ip_weighted(i, &scaled)
            }
        }
    }

    fn col_query(&self, j: usize, v: Query<'_>) -> Result<u64, OracleError> {
        match &self.mode {
            SimulationMode::Symmetrize => self.row_query(j, v),
            SimulationMode::Weighted { x, y } => {
                let scaled = self.scaled(y[j], v.values(self.base.n()), x)?;
                self.base.col_ip_weighted(j, &scaled)
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Query<'a> {
    Range(BitRange),
    Vector(&'a [u64]),
}

impl<'a> Query<'a> {
    fn values(self, n: usize) -> Box<dyn Iterator<Item = u64> + 'a> {
        match self {
            Query::Range(r) => Box::new((0..n).map(move |k| u64::from(r.contains(k)))),
            Query::Vector(v) => Box::new(v.iter().copied()),
        }
    }
}

impl<O: InnerProductOracle> InnerProductOracle for SimulatedOracle<O> {
    fn n(&self) -> usize {
        self.base.n()
    }

    fn rho(&self) -> u64 {
        self.rho
    }

    fn row_ip_range(&self, i: usize, r: BitRange) -> Result<u64, OracleError> {
        check_index(i, self.n())?;
        check_range(&r, self.n())?;
        self.counters.charge_row();
        self.row_query(i, Query::Range(r))
    }

    fn col_ip_range(&self, j: usize, r: BitRange) -> Result<u64, OracleError> {
        check_index(j, self.n())?;
        check_range(&r, self.n())?;
        self.counters.charge_col();
        self.col_query(j, Query::Range(r))
    }

    fn row_ip_weighted(&self, i: usize, v: &[u64]) -> Result<u64, OracleError> {
        check_index(i, self.n())?;
        check_vector(v, self.n())?;
        self.counters.charge_row();
        self.row_query(i, Query::Vector(v))
    }

    fn col_ip_weighted(&self, j: usize, v: &[u64]) -> Result<u64, OracleError> {
        check_index(j, self.n())?;
        check_vector(v, self.n())?;
        self.counters.charge_col();
        self.col_query(j, Query::Vector(v))
    }

    fn counter(&self) -> QueryCounter {
        self.base.counter()
    }
}

pub fn simulate_symmetric<O: InnerProductOracle>(
    base: O,
) -> Result<SimulatedOracle<O>, OracleError> {
    SimulatedOracle::symmetrize(base)
}

pub fn simulate_weighted<O: InnerProductOracle>(
    base: O,
    x: &WeightVector,
    y: &WeightVector,
) -> Result<SimulatedOracle<O>, GeneralError> {
    SimulatedOracle::weighted(base, x, y)
}

/// The oracle over `D = C + C^T`.
pub type SymmetrizedWeighted<O> = SimulatedOracle<SimulatedOracle<O>>;

pub fn symmetrized_weighted<O: InnerProductOracle>(
    base: O,
    x: &WeightVector,
    y: &WeightVector,
) -> Result<SymmetrizedWeighted<O>, GeneralError> {
    let weighted = SimulatedOracle::weighted(base, x, y)?;
    Ok(SimulatedOracle::symmetrize(weighted)?)
}

/// Estimate of `x^T A y` for any nonnegative `A`: half of the estimate of
/// `1^T (C + C^T) 1`. Queries are counted on `base`.
pub fn bfe_general<O, R>(
    base: O,
    x: &WeightVector,
    y: &WeightVector,
    epsilon: Epsilon,
    rng: &mut R,
    cfg: &BfeConfig,
) -> Result<Estimate, GeneralError>
where
    O: InnerProductOracle,
    R: RandomSource + ?Sized,
{
    let d = symmetrized_weighted(base, x, y)?;
    let mut est = bfe(&d, epsilon, rng, cfg)?;
    est.value /= 2.0;
    Ok(est)
}

/// Almost-uniform sampler of ordered entries `(i, j)` with probability close
/// to `x_i A_ij y_j / x^T A y`.
#[derive(Debug)]
pub struct GeneralSampler<O> {
    oracle: SymmetrizedWeighted<O>,
    sampler: SauSampler,
}

impl<O: InnerProductOracle> GeneralSampler<O> {
    pub fn prepare<R: RandomSource + ?Sized>(
        base: O,
        x: &WeightVector,
        y: &WeightVector,
        epsilon: Epsilon,
        rng: &mut R,
        settings: &SauSettings,
    ) -> Result<Self, GeneralError> {
        let oracle = symmetrized_weighted(base, x, y)?;
        let sampler = SauSampler::prepare(&oracle, epsilon, rng, settings)?;
        Ok(Self { oracle, sampler })
    }

    pub fn sampler(&self) -> &SauSampler {
        &self.sampler
    }

    /// The base oracle.
    pub fn base(&self) -> &O {
        self.oracle.base().base()
    }

    pub fn sample<R: RandomSource + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<EntrySample, GeneralError> {
        let drawn = self.sampler.sample(&self.oracle, rng)?;
        orient(self.oracle.base(), drawn, rng)
    }
}

/// Turns an entry `D_ij` of `C + C^T` into the ordered entry `(i, j)` with
/// probability `C_ij / (C_ij + C_ji)`, else `(j, i)`, reporting the value of
/// `A`. Costs two base queries.
pub fn orient<O, R>(
    weighted: &SimulatedOracle<O>,
    drawn: EntrySample,
    rng: &mut R,
) -> Result<EntrySample, GeneralError>
where
    O: InnerProductOracle,
    R: RandomSource + ?Sized,
{
    let SimulationMode::Weighted { x, y } = weighted.mode() else {
        panic!("orient needs the weighted oracle");
    };
    let n = weighted.n();
    let (i, j) = (drawn.row, drawn.col);
    let c_ij = weighted.row_ip_range(i, BitRange::single(j, n)?)?;
    let c_ji = weighted.row_ip_range(j, BitRange::single(i, n)?)?;
    let total = c_ij + c_ji;
    assert!(total > 0, "drawn entry of C + C^T must be positive");
    let (row, col, c) = if rng.bernoulli(c_ij, total) {
        (i, j, c_ij)
    } else {
        (j, i, c_ji)
    };
    Ok(EntrySample {
        row,
        col,
        value: c / (x[row] * y[col]),
    })
}

/// One sample, including the rough estimate.
pub fn sau_general<O, R>(
    base: O,
    x: &WeightVector,
    y: &WeightVector,
    epsilon: Epsilon,
    rng: &mut R,
    settings: &SauSettings,
) -> Result<EntrySample, GeneralError>
where
    O: InnerProductOracle,
    R: RandomSource + ?Sized,
{
    GeneralSampler::prepare(base, x, y, epsilon, rng, settings)?.sample(rng)
}
