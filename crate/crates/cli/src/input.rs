use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ipq_core::instances::{graph_to_quadratic, load_graph};
use ipq_core::{exact_bilinear, load_matrix, load_weights, Matrix, WeightVector};
use serde::Serialize;

use crate::args::Input;
use crate::{CliError, VERIFY_MAX_N};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Symmetric matrix, target `1^T A 1`.
    Symmetric,
    /// Asymmetric matrix without weights, target `1^T A 1`.
    Asymmetric,
    /// Target `x^T A y`.
    Bilinear,
    /// Graph with vertex weights `f`, target `f^T A f / 2`.
    Graph,
}

pub struct Problem {
    pub kind: Kind,
    pub a: Matrix,
    /// Weights for the general path; `None` for symmetric input.
    pub weights: Option<(WeightVector, WeightVector)>,
}

#[derive(Debug, Serialize)]
pub struct InputSummary {
    pub kind: Kind,
    pub n: usize,
    pub rho: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_x: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_y: Option<u64>,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Open {
            path: path.to_path_buf(),
            source,
        })
}

pub fn read_matrix(path: &Path) -> Result<Matrix, CliError> {
    load_matrix(open(path)?).map_err(|source| CliError::Load {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_weights(path: &Path) -> Result<WeightVector, CliError> {
    load_weights(open(path)?).map_err(|source| CliError::Load {
        path: path.to_path_buf(),
        source,
    })
}

impl Problem {
    pub fn load(input: &Input) -> Result<Self, CliError> {
        if let (Some(graph), Some(weights)) = (&input.graph, &input.weights) {
            let f = read_weights(weights)?;
            let g = load_graph(open(graph)?, f).map_err(|source| CliError::LoadGraph {
                path: graph.clone(),
                source,
            })?;
            let (a, f, _) = graph_to_quadratic(&g)?;
            return Ok(Self {
                kind: Kind::Graph,
                a,
                weights: Some((f.clone(), f)),
            });
        }
        let path = input
            .matrix
            .as_ref()
            .ok_or_else(|| CliError::Invalid("one of --matrix or --graph is required".into()))?;
        let a = read_matrix(path)?;
        if let (Some(x), Some(y)) = (&input.x, &input.y) {
            let (x, y) = (read_weights(x)?, read_weights(y)?);
            return Ok(Self {
                kind: Kind::Bilinear,
                a,
                weights: Some((x, y)),
            });
        }
        if a.is_symmetric() {
            Ok(Self {
                kind: Kind::Symmetric,
                a,
                weights: None,
            })
        } else {
            let ones = WeightVector::ones(a.n());
            Ok(Self {
                kind: Kind::Asymmetric,
                a,
                weights: Some((ones.clone(), ones)),
            })
        }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn summary(&self) -> InputSummary {
        let (gamma_x, gamma_y) = match (&self.kind, &self.weights) {
            (Kind::Bilinear | Kind::Graph, Some((x, y))) => (Some(x.gamma()), Some(y.gamma())),
            _ => (None, None),
        };
        InputSummary {
            kind: self.kind,
            n: self.a.n(),
            rho: self.a.rho(),
            gamma_x,
            gamma_y,
        }
    }

    /// Factor between the estimated bilinear form and the reported target.
    pub fn divisor(&self) -> f64 {
        if self.kind == Kind::Graph {
            2.0
        } else {
            1.0
        }
    }

    /// The target by full traversal.
    pub fn exact(&self) -> Result<u64, CliError> {
        let value = self.form_exact()?;
        Ok(if self.kind == Kind::Graph {
            value / 2
        } else {
            value
        })
    }

    /// `x^T A y` (or `1^T A 1`) by full traversal.
    pub fn form_exact(&self) -> Result<u64, CliError> {
        if self.n() > VERIFY_MAX_N {
            return Err(CliError::VerifyTooLarge(self.n()));
        }
        let value = match &self.weights {
            Some((x, y)) => exact_bilinear(&self.a, x, y)?,
            None => exact_bilinear(
                &self.a,
                &WeightVector::ones(self.n()),
                &WeightVector::ones(self.n()),
            )?,
        };
        Ok(value)
    }

    /// Weight of cell `(i, j)` in the sampling target, before normalizing.
    pub fn cell_weight(&self, i: usize, j: usize) -> u64 {
        let a = self.a.get(i, j);
        match &self.weights {
            Some((x, y)) => x.values()[i] * a * y.values()[j],
            None => a,
        }
    }
}
