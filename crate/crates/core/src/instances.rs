//! Seeded instance generators: random matrices, planted blocks, and the
//! vertex-weighted graph families that defeat local-query estimators.
//!
//! Graph file format: `graph <n> <edge_count>`, then one `<u> <v>` line per
//! undirected edge (0-based, no self-loops, no duplicates).

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matrix::{Matrix, MatrixError, WeightVector};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("density {0} is not in [0, 1]")]
    Density(f64),
    #[error("m_target / rho = {m_target}/{rho} is not a perfect square; nearest feasible m_target is {suggestion}")]
    NotPlantable {
        m_target: u64,
        rho: u64,
        suggestion: u64,
    },
    #[error("planted block of side {side} does not fit in n = {n}")]
    BlockTooLarge { side: u64, n: usize },
    #[error("graph family needs n even, n > 36 and sqrt(n) integral; got n = {0}")]
    FamilySize(usize),
    #[error("line {line}: {msg}")]
    GraphParse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_density(p: f64) -> Result<(), InstanceError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(InstanceError::Density(p))
    }
}

/// Symmetric matrix: each upper-triangle cell (diagonal included) is nonzero
/// with probability `p`, uniform in `1..=rho`, and mirrored.
pub fn gen_random_symmetric(
    n: usize,
    rho: u64,
    p: f64,
    seed: u64,
) -> Result<Matrix, InstanceError> {
    check_density(p)?;
    let mut rng = rng_for(seed);
    let mut entries = vec![0u64; n * n];
    for i in 0..n {
        for j in i..n {
            if rng.gen_bool(p) {
                let v = rng.gen_range(1..=rho.max(1));
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
    }
    Ok(Matrix::new(n, rho, entries)?)
}

/// Matrix with every cell independently nonzero with probability `p`.
pub fn gen_random(n: usize, rho: u64, p: f64, seed: u64) -> Result<Matrix, InstanceError> {
    check_density(p)?;
    let mut rng = rng_for(seed);
    let entries = (0..n * n)
        .map(|_| {
            if rng.gen_bool(p) {
                rng.gen_range(1..=rho.max(1))
            } else {
                0
            }
        })
        .collect();
    Ok(Matrix::new(n, rho, entries)?)
}

/// Weights uniform in `0..=gamma`.
pub fn gen_weights(n: usize, gamma: u64, seed: u64) -> Result<WeightVector, InstanceError> {
    let mut rng = rng_for(seed);
    let values = (0..n).map(|_| rng.gen_range(0..=gamma)).collect();
    Ok(WeightVector::new(gamma, values)?)
}

pub fn gen_zero(n: usize, rho: u64) -> Result<Matrix, InstanceError> {
    Ok(Matrix::zeros(n, rho)?)
}

/// `rho` on `I x I` for a random `I` with `|I| = sqrt(m_target / rho)`, zero
/// elsewhere, so that `1^T A 1 = m_target`.
pub fn gen_planted(n: usize, rho: u64, m_target: u64, seed: u64) -> Result<Matrix, InstanceError> {
    let side = planted_side(rho, m_target)?;
    if side > n as u64 {
        return Err(InstanceError::BlockTooLarge { side, n });
    }
    let mut rng = rng_for(seed);
    let chosen = index::sample(&mut rng, n, side as usize).into_vec();
    let mut entries = vec![0u64; n * n];
    for &i in &chosen {
        for &j in &chosen {
            entries[i * n + j] = rho;
        }
    }
    Ok(Matrix::new(n, rho, entries)?)
}

fn planted_side(rho: u64, m_target: u64) -> Result<u64, InstanceError> {
    let rho = rho.max(1);
    let side = (m_target / rho).isqrt();
    if m_target.is_multiple_of(rho) && side * side == m_target / rho {
        return Ok(side);
    }
    let lower = rho * side * side;
    let upper = rho * (side + 1) * (side + 1);
    let suggestion = if m_target - lower <= upper - m_target {
        lower
    } else {
        upper
    };
    Err(InstanceError::NotPlantable {
        m_target,
        rho,
        suggestion,
    })
}

/// A simple undirected graph with positive vertex weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphInstance {
    pub n: usize,
    /// Unordered pairs stored as `(min, max)`.
    pub edges: Vec<(usize, usize)>,
    pub weights: WeightVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFamily {
    /// Weighted edge sum `(rho^2 + 2) n`.
    G1,
    /// Weighted edge sum `(2 rho^2 + 1) n`.
    GRho,
}

/// Independent set on `n - 6 sqrt(n)` vertices plus three disjoint complete
/// bipartite graphs `H(A1,A2)`, `H(A3,A4)`, `H(A5,A6)` with `|A_k| = sqrt(n)`.
/// Half the vertices weigh 1 and half weigh `rho`. In `G1` the parts
/// `A1..A4` weigh 1 and `A5, A6` weigh `rho`; in `GRho` it is the reverse.
pub fn gen_graph_family(
    n: usize,
    rho: u64,
    family: GraphFamily,
    seed: u64,
) -> Result<GraphInstance, InstanceError> {
    let side = n.isqrt();
    if !n.is_multiple_of(2) || n <= 36 || side * side != n || 4 * side > n / 2 {
        return Err(InstanceError::FamilySize(n));
    }
    let mut rng = rng_for(seed);
    let mut vertices: Vec<usize> = (0..n).collect();
    vertices.shuffle(&mut rng);
    let (heavy, light) = vertices.split_at(n / 2);
    let mut weights = vec![0u64; n];
    for &v in heavy {
        weights[v] = rho;
    }
    for &v in light {
        weights[v] = 1;
    }
    let (four_from, two_from) = match family {
        GraphFamily::G1 => (light, heavy),
        GraphFamily::GRho => (heavy, light),
    };
    let parts: Vec<&[usize]> = four_from[..4 * side]
        .chunks(side)
        .chain(two_from[..2 * side].chunks(side))
        .collect();
    let mut edges = Vec::with_capacity(3 * n);
    for pair in parts.chunks(2) {
        for &u in pair[0] {
            for &v in pair[1] {
                edges.push((u.min(v), u.max(v)));
            }
        }
    }
    edges.sort_unstable();
    Ok(GraphInstance {
        n,
        edges,
        weights: WeightVector::new(rho.max(1), weights)?,
    })
}

/// Adjacency matrix, the weight vector, and `Q = sum_{uv in E} f(u) f(v)` by
/// edge traversal. For a simple graph `f^T A f = 2 Q`.
pub fn graph_to_quadratic(g: &GraphInstance) -> Result<(Matrix, WeightVector, u64), InstanceError> {
    let n = g.n;
    let mut entries = vec![0u64; n * n];
    let f = g.weights.values();
    let mut q = 0u64;
    for &(u, v) in &g.edges {
        entries[u * n + v] = 1;
        entries[v * n + u] = 1;
        q += f[u] * f[v];
    }
    Ok((Matrix::new(n, 1, entries)?, g.weights.clone(), q))
}

pub fn write_graph<W: Write>(g: &GraphInstance, mut out: W) -> io::Result<()> {
    writeln!(out, "graph {} {}", g.n, g.edges.len())?;
    for (u, v) in &g.edges {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

/// Reads the edge list; weights come from a separate weights file.
pub fn load_graph<R: BufRead>(
    source: R,
    weights: WeightVector,
) -> Result<GraphInstance, InstanceError> {
    let mut n = None;
    let mut expected = 0usize;
    let mut seen = BTreeSet::new();
    for (k, line) in source.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let err = |msg: String| InstanceError::GraphParse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let Some(n) = n else {
            if fields.len() != 3 || fields[0] != "graph" {
                return Err(err("expected header `graph <n> <edge_count>`".into()));
            }
            let parsed: usize = fields[1]
                .parse()
                .map_err(|_| err("bad vertex count".into()))?;
            expected = fields[2]
                .parse()
                .map_err(|_| err("bad edge count".into()))?;
            n = Some(parsed);
            continue;
        };
        if fields.len() != 2 {
            return Err(err(format!("expected 2 fields, found {}", fields.len())));
        }
        let u: usize = fields[0]
            .parse()
            .map_err(|_| err(format!("bad vertex {:?}", fields[0])))?;
        let v: usize = fields[1]
            .parse()
            .map_err(|_| err(format!("bad vertex {:?}", fields[1])))?;
        if u >= n || v >= n {
            return Err(err(format!("vertex out of range for n = {n}")));
        }
        if u == v {
            return Err(err("self-loop".into()));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(err(format!("duplicate edge {u} {v}")));
        }
    }
    let n = n.ok_or(InstanceError::GraphParse {
        line: 1,
        msg: "missing header".into(),
    })?;
    if seen.len() != expected {
        return Err(InstanceError::GraphParse {
            line: 1,
            msg: format!("header declares {expected} edges, found {}", seen.len()),
        });
    }
    if weights.n() != n {
        return Err(MatrixError::DimensionMismatch {
            left: n,
            right: weights.n(),
        }
        .into());
    }
    Ok(GraphInstance {
        n,
        edges: seen.into_iter().collect(),
        weights,
    })
}
