//! Dense nonnegative integer matrices, weight vectors, index ranges, and the
//! exact (full traversal) reference computations used to check the sublinear
//! estimators.
//!
//! Text formats, all ASCII and `\n` terminated, 0-based indices:
//!
//! ```text
//! dense <n> <rho>          sparse <n> <rho>         weights <n> <gamma>
//! a00 a01 ... a0(n-1)      <i> <j> <v>              w0
//! ...                      ...                      ...
//! ```
//!
//! Unlisted sparse entries are zero. Blank lines are ignored.

use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("entry exceeds rho")]
    EntryExceedsRho,
    #[error("entry exceeds gamma")]
    EntryExceedsGamma,
    #[error("negative entry")]
    NegativeEntry,
    #[error("not an integer: {0:?}")]
    BadInteger(String),
    #[error("expected {expected} rows, found {found}")]
    WrongRowCount { expected: usize, found: usize },
    #[error("expected {expected} columns, found {found}")]
    WrongColumnCount { expected: usize, found: usize },
    #[error("sparse line must have 3 fields, found {0}")]
    WrongFieldCount(usize),
    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("duplicate entry ({0}, {1})")]
    DuplicateEntry(usize, usize),
    #[error("missing header")]
    MissingHeader,
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("bound must be at least 1")]
    ZeroBound,
    #[error("entry ({row}, {col}) = {value} exceeds rho = {rho}")]
    EntryExceedsRho {
        row: usize,
        col: usize,
        value: u64,
        rho: u64,
    },
    #[error("weight {index} = {value} exceeds gamma = {gamma}")]
    WeightExceedsGamma {
        index: usize,
        value: u64,
        gamma: u64,
    },
    #[error("expected {expected} values, got {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid range [{lo}, {hi}) for n = {n}")]
    InvalidRange { lo: usize, hi: usize, n: usize },
    #[error("rho * gamma_x * gamma_y * n^2 does not fit in 64 bits")]
    Overflow,
}

fn parse_err(line: usize, kind: ParseErrorKind) -> MatrixError {
    MatrixError::Parse { line, kind }
}

/// An `n x n` matrix with entries in `0..=rho`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    n: usize,
    rho: u64,
    entries: Vec<u64>,
}

impl Matrix {
    pub fn new(n: usize, rho: u64, entries: Vec<u64>) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        if rho == 0 {
            return Err(MatrixError::ZeroBound);
        }
        if entries.len() != n * n {
            return Err(MatrixError::WrongLength {
                expected: n * n,
                found: entries.len(),
            });
        }
        if let Some(pos) = entries.iter().position(|&v| v > rho) {
            return Err(MatrixError::EntryExceedsRho {
                row: pos / n,
                col: pos % n,
                value: entries[pos],
                rho,
            });
        }
        Ok(Self { n, rho, entries })
    }

    pub fn from_rows(rho: u64, rows: &[Vec<u64>]) -> Result<Self, MatrixError> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(MatrixError::WrongLength {
                    expected: n,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(n, rho, entries)
    }

    pub fn zeros(n: usize, rho: u64) -> Result<Self, MatrixError> {
        Self::new(n, rho, vec![0; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> u64 {
        self.rho
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut entries = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.get(i, j);
            }
        }
        Matrix {
            n,
            rho: self.rho,
            entries,
        }
    }

    /// Sum of all entries, `1^T A 1`.
    pub fn total(&self) -> u64 {
        self.entries.iter().sum()
    }

    pub fn write_dense<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "dense {} {}", self.n, self.rho)?;
        for i in 0..self.n {
            let row = self.row(i);
            let mut line = String::with_capacity(row.len() * 3);
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn write_sparse<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sparse {} {}", self.n, self.rho)?;
        for i in 0..self.n {
            for (j, &v) in self.row(i).iter().enumerate() {
                if v > 0 {
                    writeln!(out, "{i} {j} {v}")?;
                }
            }
        }
        Ok(())
    }

    pub fn to_dense_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_dense(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dense_string())
    }
}

/// A vector in `[[gamma]]^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    gamma: u64,
    values: Vec<u64>,
}

impl WeightVector {
    pub fn new(gamma: u64, values: Vec<u64>) -> Result<Self, MatrixError> {
        if values.is_empty() {
            return Err(MatrixError::EmptyDimension);
        }
        if gamma == 0 {
            return Err(MatrixError::ZeroBound);
        }
        if let Some(index) = values.iter().position(|&v| v > gamma) {
            return Err(MatrixError::WeightExceedsGamma {
                index,
                value: values[index],
                gamma,
            });
        }
        Ok(Self { gamma, values })
    }

    pub fn ones(n: usize) -> Self {
        Self {
            gamma: 1,
            values: vec![1; n.max(1)],
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "weights {} {}", self.values.len(), self.gamma)?;
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// The `{0,1}^n` vector with ones exactly at `lo..hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitRange {
    lo: usize,
    hi: usize,
    n: usize,
}

impl BitRange {
    pub fn new(lo: usize, hi: usize, n: usize) -> Result<Self, MatrixError> {
        if lo > hi || hi > n {
            return Err(MatrixError::InvalidRange { lo, hi, n });
        }
        Ok(Self { lo, hi, n })
    }

    pub fn full(n: usize) -> Self {
        Self { lo: 0, hi: n, n }
    }

    pub fn single(index: usize, n: usize) -> Result<Self, MatrixError> {
        Self::new(index, index + 1, n)
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, index: usize) -> bool {
        self.lo <= index && index < self.hi
    }

    /// Splits into a left half of `ceil(len / 2)` indices and the remainder.
    pub fn split(&self) -> (BitRange, BitRange) {
        let mid = self.lo + self.len().div_ceil(2);
        (
            BitRange {
                lo: self.lo,
                hi: mid,
                n: self.n,
            },
            BitRange {
                lo: mid,
                hi: self.hi,
                n: self.n,
            },
        )
    }

    /// Dense indicator vector.
    pub fn indicator(&self) -> Vec<u64> {
        (0..self.n).map(|k| u64::from(self.contains(k))).collect()
    }
}

/// Rejects `(rho, gamma_x, gamma_y, n)` whose worst-case bilinear form does
/// not fit in a `u64`.
pub fn check_bilinear_bound(
    rho: u64,
    gamma_x: u64,
    gamma_y: u64,
    n: usize,
) -> Result<u64, MatrixError> {
    let n = n as u64;
    rho.checked_mul(gamma_x)
        .and_then(|v| v.checked_mul(gamma_y))
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(n))
        .ok_or(MatrixError::Overflow)
}

/// `x^T A y` by full traversal.
pub fn exact_bilinear(a: &Matrix, x: &WeightVector, y: &WeightVector) -> Result<u64, MatrixError> {
    for v in [x, y] {
        if v.n() != a.n() {
            return Err(MatrixError::DimensionMismatch {
                left: a.n(),
                right: v.n(),
            });
        }
    }
    check_bilinear_bound(a.rho(), x.gamma(), y.gamma(), a.n())?;
    let mut total = 0u64;
    for (i, &xi) in x.values().iter().enumerate() {
        if xi == 0 {
            continue;
        }
        let row: u64 = a
            .row(i)
            .iter()
            .zip(y.values())
            .map(|(&aij, &yj)| aij * yj)
            .sum();
        total += xi * row;
    }
    Ok(total)
}

/// `<A_{i*}, 1>` by full traversal.
pub fn exact_row_sum(a: &Matrix, i: usize) -> Result<u64, MatrixError> {
    if i >= a.n() {
        return Err(MatrixError::IndexOutOfRange { index: i, n: a.n() });
    }
    Ok(a.row(i).iter().sum())
}

struct Lines<R> {
    inner: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    fn new(inner: R) -> Self {
        Self {
            inner,
            line_no: 0,
            buf: String::new(),
        }
    }

    /// Next non-blank line, with its 1-based line number.
    fn next_line(&mut self) -> Result<Option<(usize, &str)>, MatrixError> {
        loop {
            self.buf.clear();
            if self.inner.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            if !self.buf.trim().is_empty() {
                return Ok(Some((self.line_no, self.buf.trim())));
            }
        }
    }
}

fn parse_u64(token: &str, line: usize) -> Result<u64, MatrixError> {
    token.parse::<u64>().map_err(|_| {
        let kind = if token.starts_with('-') && token[1..].parse::<u64>().is_ok() {
            ParseErrorKind::NegativeEntry
        } else {
            ParseErrorKind::BadInteger(token.to_string())
        };
        parse_err(line, kind)
    })
}

fn parse_header(
    line_no: usize,
    line: &str,
    allowed: &[&'static str],
) -> Result<(&'static str, usize, u64), MatrixError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let bad = |msg: String| parse_err(line_no, ParseErrorKind::MalformedHeader(msg));
    if fields.len() != 3 {
        return Err(bad(format!("expected 3 fields, found {}", fields.len())));
    }
    let kind = allowed
        .iter()
        .find(|k| **k == fields[0])
        .ok_or_else(|| bad(format!("unknown format {:?}", fields[0])))?;
    let n: usize = fields[1]
        .parse()
        .map_err(|_| bad(format!("bad dimension {:?}", fields[1])))?;
    let bound: u64 = fields[2]
        .parse()
        .map_err(|_| bad(format!("bad bound {:?}", fields[2])))?;
    if n == 0 {
        return Err(bad("dimension must be at least 1".into()));
    }
    if bound == 0 {
        return Err(bad("bound must be at least 1".into()));
    }
    Ok((kind, n, bound))
}

/// Reads a matrix in the dense or sparse text format.
pub fn load_matrix<R: BufRead>(source: R) -> Result<Matrix, MatrixError> {
    let mut lines = Lines::new(source);
    let (line_no, header) = lines
        .next_line()?
        .ok_or_else(|| parse_err(1, ParseErrorKind::MissingHeader))?;
    let (kind, n, rho) = parse_header(line_no, header, &["dense", "sparse"])?;
    let mut entries = vec![0u64; n * n];
    if kind == "dense" {
        let mut rows = 0usize;
        while let Some((line_no, line)) = lines.next_line()? {
            if rows == n {
                return Err(parse_err(
                    line_no,
                    ParseErrorKind::WrongRowCount {
                        expected: n,
                        found: rows + 1,
                    },
                ));
            }
            let mut cols = 0usize;
            for token in line.split_whitespace() {
                let v = parse_u64(token, line_no)?;
                if v > rho {
                    return Err(parse_err(line_no, ParseErrorKind::EntryExceedsRho));
                }
                if cols < n {
                    entries[rows * n + cols] = v;
                }
                cols += 1;
            }
            if cols != n {
                return Err(parse_err(
                    line_no,
                    ParseErrorKind::WrongColumnCount {
                        expected: n,
                        found: cols,
                    },
                ));
            }
            rows += 1;
        }
        if rows != n {
            return Err(parse_err(
                lines.line_no + 1,
                ParseErrorKind::WrongRowCount {
                    expected: n,
                    found: rows,
                },
            ));
        }
    } else {
        let mut seen = vec![false; n * n];
        while let Some((line_no, line)) = lines.next_line()? {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(
                    line_no,
                    ParseErrorKind::WrongFieldCount(fields.len()),
                ));
            }
            let mut idx = [0usize; 2];
            for (slot, token) in idx.iter_mut().zip(&fields[..2]) {
                let v = parse_u64(token, line_no)? as usize;
                if v >= n {
                    return Err(parse_err(
                        line_no,
                        ParseErrorKind::IndexOutOfRange { index: v, n },
                    ));
                }
                *slot = v;
            }
            let v = parse_u64(fields[2], line_no)?;
            if v > rho {
                return Err(parse_err(line_no, ParseErrorKind::EntryExceedsRho));
            }
            let pos = idx[0] * n + idx[1];
            if seen[pos] {
                return Err(parse_err(
                    line_no,
                    ParseErrorKind::DuplicateEntry(idx[0], idx[1]),
                ));
            }
            seen[pos] = true;
            entries[pos] = v;
        }
    }
    Matrix::new(n, rho, entries)
}

/// Reads a weight vector in the `weights <n> <gamma>` format.
pub fn load_weights<R: BufRead>(source: R) -> Result<WeightVector, MatrixError> {
    let mut lines = Lines::new(source);
    let (line_no, header) = lines
        .next_line()?
        .ok_or_else(|| parse_err(1, ParseErrorKind::MissingHeader))?;
    let (_, n, gamma) = parse_header(line_no, header, &["weights"])?;
    let mut values = Vec::with_capacity(n);
    while let Some((line_no, line)) = lines.next_line()? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 1 {
            return Err(parse_err(
                line_no,
                ParseErrorKind::WrongColumnCount {
                    expected: 1,
                    found: fields.len(),
                },
            ));
        }
        if values.len() == n {
            return Err(parse_err(
                line_no,
                ParseErrorKind::WrongRowCount {
                    expected: n,
                    found: n + 1,
                },
            ));
        }
        let v = parse_u64(fields[0], line_no)?;
        if v > gamma {
            return Err(parse_err(line_no, ParseErrorKind::EntryExceedsGamma));
        }
        values.push(v);
    }
    if values.len() != n {
        return Err(parse_err(
            lines.line_no + 1,
            ParseErrorKind::WrongRowCount {
                expected: n,
                found: values.len(),
            },
        ));
    }
    WeightVector::new(gamma, values)
}
