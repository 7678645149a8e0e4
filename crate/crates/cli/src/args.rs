use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sublinear-query estimation of bilinear forms and almost-uniform sampling
/// of matrix entries over an inner product oracle.
///
/// Environment: IPQ_CK overrides the estimator sample constant, IPQ_CGAMMA
/// the sampler attempt constant.
#[derive(Debug, Parser)]
#[command(name = "ipq", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Estimate x^T A y (or 1^T A 1, or a graph's weighted edge sum).
    Estimate(EstimateArgs),
    /// Draw almost-uniform weighted entry samples.
    Sample(SampleArgs),
    /// Check the row sampler against its exact law.
    RegrTest(RegrTestArgs),
    /// Compute the exact value by full traversal.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    G1,
    Grho,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Random matrix, symmetric unless --asymmetric.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rho: u64,
        /// Probability that a cell is nonzero.
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long)]
        asymmetric: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Dense)]
        format: Format,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Symmetric matrix with a planted all-rho block of total mass m.
    Planted {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rho: u64,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Sparse)]
        format: Format,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Vertex-weighted graph from the lower-bound family.
    GraphFamily {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rho: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge list output.
        #[arg(short, long)]
        out: PathBuf,
        /// Weights output; defaults to the edge list path with `.weights` appended.
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
}

/// Matrix or graph input shared by the estimating commands.
#[derive(Debug, Clone, Args)]
pub struct Input {
    #[arg(long, required_unless_present = "graph", conflicts_with = "graph")]
    pub matrix: Option<PathBuf>,
    #[arg(long, requires = "y", requires = "matrix")]
    pub x: Option<PathBuf>,
    #[arg(long, requires = "x", requires = "matrix")]
    pub y: Option<PathBuf>,
    /// Edge list; needs --weights.
    #[arg(long, requires = "weights")]
    pub graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub epsilon: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Also compute the exact value (n <= 8192).
    #[arg(long)]
    pub verify: bool,
    /// Fail unless at least --min-fraction of trials land within (1 +- eps).
    #[arg(long, requires = "verify")]
    pub assert: bool,
    #[arg(long, default_value_t = 0.9)]
    pub min_fraction: f64,
    /// Always sample rows, even when reading every row sum would be cheaper.
    #[arg(long)]
    pub no_fallback: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub epsilon: String,
    #[arg(long)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail unless the TV distance to the exact law is below --tv-max.
    #[arg(long)]
    pub assert: bool,
    #[arg(long, default_value_t = 0.02)]
    pub tv_max: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct RegrTestArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub row: usize,
    #[arg(long)]
    pub samples: u64,
    /// Column range start (inclusive).
    #[arg(long)]
    pub lo: Option<usize>,
    /// Column range end (exclusive).
    #[arg(long)]
    pub hi: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail unless TV is below --tv-max and every call kept to the query budget.
    #[arg(long)]
    pub assert: bool,
    #[arg(long, default_value_t = 0.02)]
    pub tv_max: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub output: Output,
}
