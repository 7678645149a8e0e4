//! The random choices made by the samplers, and an exact enumerator over them.
//!
//! Every algorithm in this crate draws randomness only through
//! [`RandomSource`]: a uniform index or an integer-ratio Bernoulli trial. Any
//! `rand::Rng` is a source. [`enumerate_law`] instead walks every branch of
//! the decision tree with its exact rational weight, which yields the exact
//! output law of the real implementation on small inputs.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

pub trait RandomSource {
    /// Uniform index in `0..n`. Requires `n >= 1`.
    fn uniform_index(&mut self, n: usize) -> usize;

    /// `true` with probability exactly `num / den`. Requires `num <= den` and
    /// `den >= 1`. Degenerate trials (`num == 0` or `num == den`) consume no
    /// randomness.
    fn bernoulli(&mut self, num: u64, den: u64) -> bool;
}

impl<R: Rng + ?Sized> RandomSource for R {
    fn uniform_index(&mut self, n: usize) -> usize {
        debug_assert!(n >= 1);
        if n == 1 {
            0
        } else {
            self.gen_range(0..n)
        }
    }

    fn bernoulli(&mut self, num: u64, den: u64) -> bool {
        debug_assert!(den >= 1 && num <= den);
        if num == 0 {
            false
        } else if num >= den {
            true
        } else {
            self.gen_range(0..den) < num
        }
    }
}

struct Decision {
    choice: usize,
    arity: usize,
}

/// A [`RandomSource`] that replays a prescribed path through the decision
/// tree and tracks the exact probability of that path.
pub struct Enumerator {
    path: Vec<Decision>,
    cursor: usize,
    weight: BigRational,
}

impl Enumerator {
    fn next_choice(&mut self, arity: usize) -> usize {
        if self.cursor == self.path.len() {
            self.path.push(Decision { choice: 0, arity });
        }
        let d = &self.path[self.cursor];
        assert_eq!(
            d.arity, arity,
            "enumerated computation is not deterministic given its random choices"
        );
        self.cursor += 1;
        d.choice
    }

    fn scale(&mut self, num: u64, den: u64) {
        self.weight *= BigRational::new(BigInt::from(num), BigInt::from(den));
    }

    /// Moves to the next unexplored leaf. Returns false when exhausted.
    fn advance(&mut self) -> bool {
        self.path.truncate(self.cursor);
        while let Some(last) = self.path.last_mut() {
            if last.choice + 1 < last.arity {
                last.choice += 1;
                return true;
            }
            self.path.pop();
        }
        false
    }
}

impl RandomSource for Enumerator {
    fn uniform_index(&mut self, n: usize) -> usize {
        assert!(n >= 1);
        if n == 1 {
            return 0;
        }
        let c = self.next_choice(n);
        self.scale(1, n as u64);
        c
    }

    fn bernoulli(&mut self, num: u64, den: u64) -> bool {
        assert!(den >= 1 && num <= den);
        if num == 0 {
            return false;
        }
        if num == den {
            return true;
        }
        if self.next_choice(2) == 0 {
            self.scale(num, den);
            true
        } else {
            self.scale(den - num, den);
            false
        }
    }
}

/// Runs `run` once per leaf of its random decision tree and returns the exact
/// probability of each outcome. `run` must be a deterministic function of the
/// choices it draws; the number of leaves must be small.
pub fn enumerate_law<T, F>(mut run: F) -> BTreeMap<T, BigRational>
where
    T: Ord,
    F: FnMut(&mut Enumerator) -> T,
{
    let mut law: BTreeMap<T, BigRational> = BTreeMap::new();
    let mut e = Enumerator {
        path: Vec::new(),
        cursor: 0,
        weight: BigRational::one(),
    };
    loop {
        e.cursor = 0;
        e.weight = BigRational::one();
        let outcome = run(&mut e);
        let w = std::mem::replace(&mut e.weight, BigRational::zero());
        *law.entry(outcome).or_insert_with(BigRational::zero) += w;
        if !e.advance() {
            return law;
        }
    }
}
