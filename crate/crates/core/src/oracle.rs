//! Inner product oracle access to a hidden matrix.
//!
//! A query returns `<A_{i*}, v>` or `<A_{*j}, v>` and costs one unit,
//! regardless of how the answer is computed. [`PrefixOracle`] answers
//! contiguous-range queries in constant time from row and column prefix-sum
//! tables built once from the matrix; arbitrary weight vectors are answered
//! by traversal but still charged a single query.

use std::cell::Cell;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{BitRange, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("range over dimension {found} used with an oracle of dimension {expected}")]
    RangeDimension { expected: usize, found: usize },
    #[error("query vector has length {found}, expected {expected}")]
    VectorLength { expected: usize, found: usize },
    #[error("inner product does not fit in 64 bits")]
    Overflow,
}

/// Snapshot of the queries charged to a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounter {
    pub row_queries: u64,
    pub col_queries: u64,
}

impl QueryCounter {
    pub fn total(&self) -> u64 {
        self.row_queries + self.col_queries
    }

    /// Queries charged between `earlier` and `self`.
    pub fn since(&self, earlier: &QueryCounter) -> QueryCounter {
        QueryCounter {
            row_queries: self.row_queries - earlier.row_queries,
            col_queries: self.col_queries - earlier.col_queries,
        }
    }
}

impl std::ops::Add for QueryCounter {
    type Output = QueryCounter;

    fn add(self, rhs: QueryCounter) -> QueryCounter {
        QueryCounter {
            row_queries: self.row_queries + rhs.row_queries,
            col_queries: self.col_queries + rhs.col_queries,
        }
    }
}

/// Live query counts of one session. Not shared between threads: each
/// thread opens its own session (see [`SharedPrefix`]).
#[derive(Debug, Default)]
pub struct Counters {
    row: Cell<u64>,
    col: Cell<u64>,
}

impl Counters {
    #[inline]
    pub fn charge_row(&self) {
        self.row.set(self.row.get() + 1);
    }

    #[inline]
    pub fn charge_col(&self) {
        self.col.set(self.col.get() + 1);
    }

    pub fn snapshot(&self) -> QueryCounter {
        QueryCounter {
            row_queries: self.row.get(),
            col_queries: self.col.get(),
        }
    }

    pub fn reset(&self) {
        self.row.set(0);
        self.col.set(0);
    }
}

/// Query access to an `n x n` nonnegative matrix with entries at most `rho`.
pub trait InnerProductOracle {
    fn n(&self) -> usize;

    /// Upper bound on every entry.
    fn rho(&self) -> u64;

    /// `<A_{i*}, 1_r>`.
    fn row_ip_range(&self, i: usize, r: BitRange) -> Result<u64, OracleError>;

    /// `<A_{*j}, 1_r>`.
    fn col_ip_range(&self, j: usize, r: BitRange) -> Result<u64, OracleError>;

    /// `<A_{i*}, v>` for an arbitrary nonnegative vector.
    fn row_ip_weighted(&self, i: usize, v: &[u64]) -> Result<u64, OracleError>;

    /// `<A_{*j}, v>` for an arbitrary nonnegative vector.
    fn col_ip_weighted(&self, j: usize, v: &[u64]) -> Result<u64, OracleError>;

    /// Queries charged so far, as seen at the level that is billed.
    fn counter(&self) -> QueryCounter;

    /// `<A_{i*}, 1>`, one row query.
    fn row_sum(&self, i: usize) -> Result<u64, OracleError> {
        self.row_ip_range(i, BitRange::full(self.n()))
    }
}

impl<O: InnerProductOracle + ?Sized> InnerProductOracle for &O {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn rho(&self) -> u64 {
        (**self).rho()
    }
    fn row_ip_range(&self, i: usize, r: BitRange) -> Result<u64, OracleError> {
        (**self).row_ip_range(i, r)
    }
    fn col_ip_range(&self, j: usize, r: BitRange) -> Result<u64, OracleError> {
        (**self).col_ip_range(j, r)
    }
    fn row_ip_weighted(&self, i: usize, v: &[u64]) -> Result<u64, OracleError> {
        (**self).row_ip_weighted(i, v)
    }
    fn col_ip_weighted(&self, j: usize, v: &[u64]) -> Result<u64, OracleError> {
        (**self).col_ip_weighted(j, v)
    }
    fn counter(&self) -> QueryCounter {
        (**self).counter()
    }
}

pub(crate) fn check_index(index: usize, n: usize) -> Result<(), OracleError> {
    if index >= n {
        Err(OracleError::IndexOutOfRange { index, n })
    } else {
        Ok(())
    }
}

pub(crate) fn check_range(r: &BitRange, n: usize) -> Result<(), OracleError> {
    if r.n() != n {
        Err(OracleError::RangeDimension {
            expected: n,
            found: r.n(),
        })
    } else {
        Ok(())
    }
}

pub(crate) fn check_vector(v: &[u64], n: usize) -> Result<(), OracleError> {
    if v.len() != n {
        Err(OracleError::VectorLength {
            expected: n,
            found: v.len(),
        })
    } else {
        Ok(())
    }
}

#[derive(Debug)]
struct PrefixTables {
    matrix: Matrix,
    /// `row_prefix[i*n + j] = sum_{k <= j} A[i][k]`
    row_prefix: Vec<u64>,
    /// `col_prefix[j*n + i] = sum_{k <= i} A[k][j]`
    col_prefix: Vec<u64>,
}

impl PrefixTables {
    #[inline]
    fn range_sum(prefix: &[u64], r: BitRange) -> u64 {
        if r.is_empty() {
            return 0;
        }
        let upper = prefix[r.hi() - 1];
        if r.lo() == 0 {
            upper
        } else {
            upper - prefix[r.lo() - 1]
        }
    }
}

/// The preprocessed oracle. [`PrefixOracle::session`] shares the tables and
/// starts an independent counter.
#[derive(Debug)]
pub struct PrefixOracle {
    tables: Arc<PrefixTables>,
    counters: Counters,
}

impl PrefixOracle {
    /// Builds both prefix tables in `O(n^2)`.
    pub fn preprocess(a: &Matrix) -> Result<Self, OracleError> {
        let n = a.n();
        a.rho().checked_mul(n as u64).ok_or(OracleError::Overflow)?;
        let mut row_prefix = vec![0u64; n * n];
        let mut col_prefix = vec![0u64; n * n];
        for i in 0..n {
            let mut acc = 0;
            for j in 0..n {
                acc += a.get(i, j);
                row_prefix[i * n + j] = acc;
            }
        }
        for j in 0..n {
            let mut acc = 0;
            for i in 0..n {
                acc += a.get(i, j);
                col_prefix[j * n + i] = acc;
            }
        }
        Ok(Self {
            tables: Arc::new(PrefixTables {
                matrix: a.clone(),
                row_prefix,
                col_prefix,
            }),
            counters: Counters::default(),
        })
    }

    /// A new session over the same tables with a zeroed counter.
    pub fn session(&self) -> PrefixOracle {
        PrefixOracle {
            tables: Arc::clone(&self.tables),
            counters: Counters::default(),
        }
    }

    /// A handle that can cross threads; open a session on each.
    pub fn shared(&self) -> SharedPrefix {
        SharedPrefix(Arc::clone(&self.tables))
    }

    pub fn read_counter(&self) -> QueryCounter {
        self.counters.snapshot()
    }

    pub fn reset_counter(&self) {
        self.counters.reset();
    }

    fn prefix_row(&self, i: usize) -> &[u64] {
        let n = self.tables.matrix.n();
        &self.tables.row_prefix[i * n..(i + 1) * n]
    }

    fn prefix_col(&self, j: usize) -> &[u64] {
        let n = self.tables.matrix.n();
        &self.tables.col_prefix[j * n..(j + 1) * n]
    }
}

/// Thread-safe handle to preprocessed tables.
#[derive(Debug, Clone)]
pub struct SharedPrefix(Arc<PrefixTables>);

impl SharedPrefix {
    pub fn session(&self) -> PrefixOracle {
        PrefixOracle {
            tables: Arc::clone(&self.0),
            counters: Counters::default(),
        }
    }
}

fn weighted_dot(values: impl Iterator<Item = u64>, v: &[u64]) -> Result<u64, OracleError> {
    let mut acc: u128 = 0;
    for (a, &w) in values.zip(v) {
        acc += u128::from(a) * u128::from(w);
    }
    u64::try_from(acc).map_err(|_| OracleError::Overflow)
}

impl InnerProductOracle for PrefixOracle {
    fn n(&self) -> usize {
        self.tables.matrix.n()
    }

    fn rho(&self) -> u64 {
        self.tables.matrix.rho()
    }

    #[inline]
    fn row_ip_range(&self, i: usize, r: BitRange) -> Result<u64, OracleError> {
        check_index(i, self.n())?;
        check_range(&r, self.n())?;
        self.counters.charge_row();
        Ok(PrefixTables::range_sum(self.prefix_row(i), r))
    }

    #[inline]
    fn col_ip_range(&self, j: usize, r: BitRange) -> Result<u64, OracleError> {
        check_index(j, self.n())?;
        check_range(&r, self.n())?;
        self.counters.charge_col();
        Ok(PrefixTables::range_sum(self.prefix_col(j), r))
    }

    fn row_ip_weighted(&self, i: usize, v: &[u64]) -> Result<u64, OracleError> {
        check_index(i, self.n())?;
        check_vector(v, self.n())?;
        self.counters.charge_row();
        weighted_dot(self.tables.matrix.row(i).iter().copied(), v)
    }

    fn col_ip_weighted(&self, j: usize, v: &[u64]) -> Result<u64, OracleError> {
        check_index(j, self.n())?;
        check_vector(v, self.n())?;
        self.counters.charge_col();
        let m = &self.tables.matrix;
        weighted_dot((0..m.n()).map(|i| m.get(i, j)), v)
    }

    fn counter(&self) -> QueryCounter {
        self.read_counter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::exact_row_sum;

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

    fn range(lo: usize, hi: usize, n: usize) -> BitRange {
        BitRange::new(lo, hi, n).unwrap()
    }

    #[test]
    fn preprocess_builds_running_sums() {
        let a = Matrix::from_rows(
            5,
            &[vec![2, 0, 5, 1], vec![0; 4], vec![0; 4], vec![1, 0, 0, 0]],
        )
        .unwrap();
        let o = PrefixOracle::preprocess(&a).unwrap();
        assert_eq!(o.prefix_row(0), &[2, 2, 7, 8]);
        assert_eq!(o.prefix_col(0), &[2, 2, 2, 3]);
        assert_eq!(o.read_counter(), QueryCounter::default());

        let z = PrefixOracle::preprocess(&Matrix::zeros(3, 1).unwrap()).unwrap();
        assert!(z
            .tables
            .row_prefix
            .iter()
            .chain(&z.tables.col_prefix)
            .all(|&v| v == 0));

        let s = PrefixOracle::preprocess(&Matrix::from_rows(3, &[vec![3]]).unwrap()).unwrap();
        assert_eq!(s.prefix_row(0), &[3]);
        assert_eq!(s.prefix_col(0), &[3]);
    }

    #[test]
    fn prefix_rows_end_at_row_sums() {
        let a = fixture4();
        let o = PrefixOracle::preprocess(&a).unwrap();
        for i in 0..4 {
            let p = o.prefix_row(i);
            assert_eq!(p[3], exact_row_sum(&a, i).unwrap());
            assert!(p.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn range_queries() {
        let a = fixture4();
        let o = PrefixOracle::preprocess(&a).unwrap();
        assert_eq!(o.row_ip_range(0, range(1, 3, 4)).unwrap(), 3);
        assert_eq!(o.col_ip_range(1, range(0, 2, 4)).unwrap(), 3);
        for i in 0..4 {
            assert_eq!(o.row_sum(i).unwrap(), exact_row_sum(&a, i).unwrap());
            // symmetric: column j over everything equals row j
            assert_eq!(
                o.col_ip_range(i, BitRange::full(4)).unwrap(),
                o.row_ip_range(i, BitRange::full(4)).unwrap()
            );
            assert_eq!(o.row_ip_range(i, range(2, 2, 4)).unwrap(), 0);
            assert_eq!(o.col_ip_range(i, range(4, 4, 4)).unwrap(), 0);
        }
    }

    #[test]
    fn weighted_queries() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        assert_eq!(o.row_ip_weighted(0, &[1, 2, 0, 1]).unwrap(), 9);
        assert_eq!(o.row_ip_weighted(0, &[0; 4]).unwrap(), 0);
        let ind = range(1, 3, 4);
        assert_eq!(
            o.row_ip_weighted(0, &ind.indicator()).unwrap(),
            o.row_ip_range(0, ind).unwrap()
        );
        assert_eq!(o.col_ip_weighted(2, &[1, 1, 1, 1]).unwrap(), 8);
        let big = PrefixOracle::preprocess(
            &Matrix::from_rows(u64::MAX / 4, &[vec![u64::MAX / 4]]).unwrap(),
        )
        .unwrap();
        assert_eq!(big.row_ip_weighted(0, &[8]), Err(OracleError::Overflow));
    }

    #[test]
    fn every_call_charges_exactly_once() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        for _ in 0..3 {
            o.row_ip_range(1, range(0, 2, 4)).unwrap();
        }
        assert_eq!(
            o.read_counter(),
            QueryCounter {
                row_queries: 3,
                col_queries: 0
            }
        );
        o.row_ip_weighted(0, &[0; 4]).unwrap();
        o.col_ip_range(0, range(0, 0, 4)).unwrap();
        o.col_ip_weighted(0, &[1; 4]).unwrap();
        assert_eq!(
            o.read_counter(),
            QueryCounter {
                row_queries: 4,
                col_queries: 2
            }
        );
        o.reset_counter();
        assert_eq!(o.read_counter(), QueryCounter::default());
    }

    #[test]
    fn invalid_queries_are_rejected_and_free() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        assert_eq!(
            o.row_ip_range(4, BitRange::full(4)),
            Err(OracleError::IndexOutOfRange { index: 4, n: 4 })
        );
        assert_eq!(
            o.col_ip_range(0, BitRange::full(5)),
            Err(OracleError::RangeDimension {
                expected: 4,
                found: 5
            })
        );
        assert_eq!(
            o.row_ip_weighted(0, &[1, 2]),
            Err(OracleError::VectorLength {
                expected: 4,
                found: 2
            })
        );
        assert_eq!(o.read_counter().total(), 0);
    }

    #[test]
    fn sessions_share_tables_but_not_counters() {
        let o = PrefixOracle::preprocess(&fixture4()).unwrap();
        let s = o.session();
        s.row_sum(0).unwrap();
        assert_eq!(s.read_counter().row_queries, 1);
        assert_eq!(o.read_counter().row_queries, 0);
        assert!(Arc::ptr_eq(&o.tables, &s.tables));
    }
}
