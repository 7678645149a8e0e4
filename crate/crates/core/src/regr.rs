//! Value-proportional sampling of an entry within one row.
//!
//! Binary descent over a contiguous column range: query the mass of the left
//! half, step left with probability `left / mass`, otherwise step right with
//! the remainder. Masses are integers, so every step is an exact rational
//! coin and the emitted column `j` has probability exactly
//! `A_ij / <A_{i*}, 1_r>`. A call costs `1 + ceil(log2 |r|)` row queries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::BitRange;
use crate::oracle::{InnerProductOracle, OracleError};
use crate::randomness::RandomSource;

/// A sampled matrix entry. `value` is always positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntrySample {
    pub row: usize,
    pub col: usize,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegrError {
    #[error("row {row} has zero mass on [{lo}, {hi})")]
    ZeroMass { row: usize, lo: usize, hi: usize },
    #[error("empty range")]
    InvalidRange,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Worst-case row queries charged by one [`regr`] call on a range of `len`
/// indices.
pub fn query_budget(len: usize) -> u64 {
    let levels = if len <= 1 {
        0
    } else {
        u64::from(usize::BITS - (len - 1).leading_zeros())
    };
    2 * levels + 2
}

/// Samples `(i, j, A_ij)` with `j` in `r`, with probability proportional to
/// `A_ij`.
pub fn regr<O, R>(oracle: &O, i: usize, r: BitRange, rng: &mut R) -> Result<EntrySample, RegrError>
where
    O: InnerProductOracle + ?Sized,
    R: RandomSource + ?Sized,
{
    if r.is_empty() {
        return Err(RegrError::InvalidRange);
    }
    let mass = oracle.row_ip_range(i, r)?;
    if mass == 0 {
        return Err(RegrError::ZeroMass {
            row: i,
            lo: r.lo(),
            hi: r.hi(),
        });
    }
    descend(oracle, i, r, mass, rng)
}

/// Descent from a range whose mass is already known; charges only the
/// per-level left-half queries.
pub(crate) fn descend<O, R>(
    oracle: &O,
    i: usize,
    mut r: BitRange,
    mut mass: u64,
    rng: &mut R,
) -> Result<EntrySample, RegrError>
where
    O: InnerProductOracle + ?Sized,
    R: RandomSource + ?Sized,
{
    debug_assert!(mass > 0);
    while r.len() > 1 {
        let (left, right) = r.split();
        let left_mass = oracle.row_ip_range(i, left)?;
        if rng.bernoulli(left_mass, mass) {
            r = left;
            mass = left_mass;
        } else {
            r = right;
            mass -= left_mass;
        }
    }
    Ok(EntrySample {
        row: i,
        col: r.lo(),
        value: mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::oracle::PrefixOracle;
    use crate::randomness::enumerate_law;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture4() -> PrefixOracle {
        let a = Matrix::from_rows(
            5,
            &[
                vec![1, 3, 0, 2],
                vec![3, 0, 5, 0],
                vec![0, 5, 2, 1],
                vec![2, 0, 1, 4],
            ],
        )
        .unwrap();
        PrefixOracle::preprocess(&a).unwrap()
    }

    fn q(num: i64, den: i64) -> BigRational {
        BigRational::new(num.into(), den.into())
    }

    #[test]
    fn budget_values() {
        assert_eq!(query_budget(1), 2);
        assert_eq!(query_budget(2), 4);
        assert_eq!(query_budget(3), 6);
        assert_eq!(query_budget(4), 6);
        assert_eq!(query_budget(16), 10);
        assert_eq!(query_budget(17), 12);
    }

    #[test]
    fn exact_law_on_row_zero() {
        let o = fixture4();
        let law = enumerate_law(|e| regr(&o, 0, BitRange::full(4), e).unwrap());
        let expected = [
            (
                EntrySample {
                    row: 0,
                    col: 0,
                    value: 1,
                },
                q(1, 6),
            ),
            (
                EntrySample {
                    row: 0,
                    col: 1,
                    value: 3,
                },
                q(1, 2),
            ),
            (
                EntrySample {
                    row: 0,
                    col: 3,
                    value: 2,
                },
                q(1, 3),
            ),
        ];
        assert_eq!(law.into_iter().collect::<Vec<_>>(), expected.to_vec());
    }

    #[test]
    fn singleton_and_zero_mass_ranges() {
        let o = fixture4();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = BitRange::new(2, 3, 4).unwrap();
        for _ in 0..10 {
            assert_eq!(
                regr(&o, 1, r, &mut rng).unwrap(),
                EntrySample {
                    row: 1,
                    col: 2,
                    value: 5
                }
            );
        }
        assert_eq!(
            regr(&o, 1, BitRange::new(3, 4, 4).unwrap(), &mut rng),
            Err(RegrError::ZeroMass {
                row: 1,
                lo: 3,
                hi: 4
            })
        );
        assert_eq!(
            regr(&o, 1, BitRange::new(2, 2, 4).unwrap(), &mut rng),
            Err(RegrError::InvalidRange)
        );
        assert!(matches!(
            regr(&o, 9, BitRange::full(4), &mut rng),
            Err(RegrError::Oracle(OracleError::IndexOutOfRange { .. }))
        ));
    }

    #[test]
    fn odd_lengths_and_budget() {
        let a = Matrix::from_rows(
            9,
            &[
                vec![0, 4, 0, 9, 1],
                vec![0; 5],
                vec![0; 5],
                vec![0; 5],
                vec![0; 5],
            ],
        )
        .unwrap();
        let o = PrefixOracle::preprocess(&a).unwrap();
        let r = BitRange::new(0, 5, 5).unwrap();
        let law = enumerate_law(|e| {
            let before = o.read_counter().total();
            let s = regr(&o, 0, r, e).unwrap();
            assert!(o.read_counter().total() - before <= query_budget(5));
            s.col
        });
        assert_eq!(law[&1], q(4, 14));
        assert_eq!(law[&3], q(9, 14));
        assert_eq!(law[&4], q(1, 14));
        assert_eq!(law.len(), 3);
    }

    #[test]
    fn same_seed_same_samples() {
        let o = fixture4();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| regr(&o, 2, BitRange::full(4), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }
}
