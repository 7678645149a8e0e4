use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ipq_core::bfe::Estimate;
use ipq_core::general::{bfe_general, GeneralError, GeneralSampler};
use ipq_core::instances::{
    gen_graph_family, gen_planted, gen_random, gen_random_symmetric, graph_to_quadratic,
    write_graph, GraphFamily,
};
use ipq_core::regr::query_budget;
use ipq_core::stats::Tally;
use ipq_core::{
    bfe, regr, BfeConfig, BitRange, Epsilon, Matrix, PrefixOracle, SauError, SauSampler,
    SauSettings,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    Cli, Command, EstimateArgs, Family, Format, GenCommand, RegrTestArgs, SampleArgs, VerifyArgs,
};
use crate::input::{read_matrix, InputSummary, Problem};
use crate::report::{emit, Assertion, ChiSquareReport, Queries, Report, Timer};
use crate::{CliError, Outcome, EXACT_LAW_MAX_N, SCHEMA_VERSION};

pub fn run(cli: Cli, argv: Vec<String>) -> Result<Outcome, CliError> {
    let timer = Timer::start();
    match cli.command {
        Command::Gen(cmd) => gen(cmd, argv, &timer),
        Command::Estimate(args) => estimate(args, argv, &timer),
        Command::Sample(args) => sample(args, argv, &timer),
        Command::RegrTest(args) => regr_test(args, argv, &timer),
        Command::Verify(args) => verify(args, argv, &timer),
    }
}

fn env_constant(var: &'static str) -> Result<Option<f64>, CliError> {
    match std::env::var(var) {
        Ok(value) => match value.trim().parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Some(v)),
            _ => Err(CliError::BadEnv { var, value }),
        },
        Err(_) => Ok(None),
    }
}

fn bfe_config(exact_fallback: bool) -> Result<BfeConfig, CliError> {
    let mut cfg = BfeConfig {
        exact_fallback,
        ..Default::default()
    };
    if let Some(c_k) = env_constant("IPQ_CK")? {
        cfg.c_k = c_k;
    }
    Ok(cfg)
}

fn sau_settings() -> Result<SauSettings, CliError> {
    let mut settings = SauSettings {
        bfe: bfe_config(true)?,
        ..Default::default()
    };
    if let Some(c) = env_constant("IPQ_CGAMMA")? {
        settings.c_gamma = c;
    }
    Ok(settings)
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Serialize>(
    command: &'static str,
    argv: Vec<String>,
    seed: Option<u64>,
    epsilon: Option<String>,
    result: T,
    assertions: Vec<Assertion>,
    timer: &Timer,
    json_out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let passed = assertions.iter().all(|a| a.passed);
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command,
        argv,
        seed,
        epsilon,
        result,
        assertions,
        wall_time_ms: timer.ms(),
    };
    emit(&report, json_out)?;
    Ok(if passed {
        Outcome::Ok
    } else {
        Outcome::AssertionFailed
    })
}

// ---------------------------------------------------------------- gen

#[derive(Serialize)]
struct GenResult {
    path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights_path: Option<PathBuf>,
    n: usize,
    rho: u64,
    /// `1^T A 1` for matrices, the weighted edge sum `Q` for graphs.
    total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<usize>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn write_matrix(a: &Matrix, format: Format, out: &Option<PathBuf>) -> Result<(), CliError> {
    let write = |w: &mut dyn Write| match format {
        Format::Dense => a.write_dense(w),
        Format::Sparse => a.write_sparse(w),
    };
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)
                .and_then(|_| w.flush())
                .map_err(|source| CliError::Write {
                    path: path.clone(),
                    source,
                })
        }
        None => {
            let mut w = io::stdout().lock();
            Ok(write(&mut w)?)
        }
    }
}

fn gen(cmd: GenCommand, argv: Vec<String>, timer: &Timer) -> Result<Outcome, CliError> {
    let (a, format, out, seed) = match cmd {
        GenCommand::Random {
            n,
            rho,
            p,
            asymmetric,
            seed,
            format,
            out,
        } => {
            let a = if asymmetric {
                gen_random(n, rho, p, seed)?
            } else {
                gen_random_symmetric(n, rho, p, seed)?
            };
            (a, format, out, seed)
        }
        GenCommand::Planted {
            n,
            rho,
            m,
            seed,
            format,
            out,
        } => (gen_planted(n, rho, m, seed)?, format, out, seed),
        GenCommand::GraphFamily {
            family,
            n,
            rho,
            seed,
            out,
            weights_out,
        } => {
            let family = match family {
                Family::G1 => GraphFamily::G1,
                Family::Grho => GraphFamily::GRho,
            };
            let g = gen_graph_family(n, rho, family, seed)?;
            let (_, _, q) = graph_to_quadratic(&g)?;
            let weights_path = weights_out.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".weights");
                p.into()
            });
            for (path, result) in [
                (&out, {
                    let mut w = create(&out)?;
                    write_graph(&g, &mut w).and_then(|_| w.flush())
                }),
                (&weights_path, {
                    let mut w = create(&weights_path)?;
                    g.weights.write(&mut w).and_then(|_| w.flush())
                }),
            ] {
                result.map_err(|source| CliError::Write {
                    path: path.clone(),
                    source,
                })?;
            }
            let result = GenResult {
                path: out,
                weights_path: Some(weights_path),
                n,
                rho,
                total: q,
                edges: Some(g.edges.len()),
            };
            return finish("gen", argv, Some(seed), None, result, vec![], timer, None);
        }
    };
    write_matrix(&a, format, &out)?;
    match out {
        Some(path) => {
            let result = GenResult {
                path,
                weights_path: None,
                n: a.n(),
                rho: a.rho(),
                total: a.total(),
                edges: None,
            };
            finish("gen", argv, Some(seed), None, result, vec![], timer, None)
        }
        None => Ok(Outcome::Ok),
    }
}

// ---------------------------------------------------------------- estimate

#[derive(Serialize)]
struct TrialRow {
    trial: u64,
    seed: u64,
    estimate: f64,
    queries: u64,
    lower_bound_used: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    within: Option<bool>,
}

#[derive(Serialize)]
struct TrialSummary {
    count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    in_interval_fraction: Option<f64>,
    mean_estimate: f64,
    mean_queries: f64,
    max_queries: u64,
    per_trial: Vec<TrialRow>,
}

#[derive(Serialize)]
struct EstimateResult {
    input: InputSummary,
    estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_error: Option<f64>,
    queries: Queries,
    c_k: f64,
    /// The first trial in full, with per-bucket detail.
    detail: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<TrialSummary>,
}

fn relative_error(estimate: f64, exact: u64) -> f64 {
    if exact == 0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::MAX
        }
    } else {
        (estimate - exact as f64).abs() / exact as f64
    }
}

fn estimate(args: EstimateArgs, argv: Vec<String>, timer: &Timer) -> Result<Outcome, CliError> {
    let epsilon: Epsilon = args.epsilon.parse()?;
    if args.trials == 0 {
        return Err(CliError::Invalid("--trials must be at least 1".into()));
    }
    let problem = Problem::load(&args.input)?;
    let exact = if args.verify {
        Some(problem.exact()?)
    } else {
        None
    };
    let shared = PrefixOracle::preprocess(&problem.a)?.shared();
    let cfg = bfe_config(!args.no_fallback)?;

    let run_trial = |trial: u64| -> Result<Estimate, CliError> {
        let session = shared.session();
        let seed = args.seed ^ trial;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut est = match &problem.weights {
            Some((x, y)) => bfe_general(&session, x, y, epsilon, &mut rng, &cfg)?,
            None => bfe(&session, epsilon, &mut rng, &cfg)?,
        };
        est.value /= problem.divisor();
        Ok(est.with_seed(seed))
    };
    let estimates: Vec<Estimate> = (0..args.trials)
        .into_par_iter()
        .map(run_trial)
        .collect::<Result<_, _>>()?;

    let eps = epsilon.as_f64();
    let first = &estimates[0];
    let trials = (args.trials > 1).then(|| {
        let rows: Vec<TrialRow> = estimates
            .iter()
            .zip(0..)
            .map(|(e, trial)| TrialRow {
                trial,
                seed: e.seed.unwrap_or_default(),
                estimate: e.value,
                queries: e.queries.total(),
                lower_bound_used: e.lower_bound_used,
                within: exact.map(|m| e.within(m as f64, eps)),
            })
            .collect();
        let count = rows.len() as f64;
        TrialSummary {
            count: args.trials,
            in_interval_fraction: exact
                .map(|_| rows.iter().filter(|r| r.within == Some(true)).count() as f64 / count),
            mean_estimate: rows.iter().map(|r| r.estimate).sum::<f64>() / count,
            mean_queries: rows.iter().map(|r| r.queries as f64).sum::<f64>() / count,
            max_queries: rows.iter().map(|r| r.queries).max().unwrap_or(0),
            per_trial: rows,
        }
    });

    let mut assertions = Vec::new();
    if args.assert {
        if let Some(m) = exact {
            let inside = estimates.iter().filter(|e| e.within(m as f64, eps)).count() as f64;
            let fraction = inside / estimates.len() as f64;
            assertions.push(Assertion::new(
                "in_interval_fraction",
                fraction >= args.min_fraction,
                format!(
                    "{fraction} of trials within (1 +- {eps}) * {m}; need {}",
                    args.min_fraction
                ),
            ));
        }
    }

    let result = EstimateResult {
        input: problem.summary(),
        estimate: first.value,
        exact,
        relative_error: exact.map(|m| relative_error(first.value, m)),
        queries: first.queries.into(),
        c_k: cfg.c_k,
        detail: first.clone(),
        trials,
    };
    finish(
        "estimate",
        argv,
        Some(args.seed),
        Some(epsilon.to_string()),
        result,
        assertions,
        timer,
        args.output.json_out.as_deref(),
    )
}

// ---------------------------------------------------------------- sample

#[derive(Serialize)]
struct EntryRow {
    row: usize,
    col: usize,
    value: u64,
    count: u64,
    frequency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
}

#[derive(Serialize)]
struct SampleResult {
    input: InputSummary,
    samples: u64,
    exhausted_failures: u64,
    tau: u64,
    m_hat: f64,
    attempts_per_sample: u64,
    setup_queries: Queries,
    queries: Queries,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_total: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi_square: Option<ChiSquareReport>,
    /// Largest and smallest `frequency / target` over the target support.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_ratio: Option<f64>,
    entries: Vec<EntryRow>,
}

enum Sampler<'a> {
    Symmetric(SauSampler, &'a PrefixOracle),
    General(GeneralSampler<&'a PrefixOracle>),
}

fn exhausted(e: &CliError) -> bool {
    matches!(
        e,
        CliError::Sau(SauError::Exhausted { .. })
            | CliError::General(GeneralError::Sau(SauError::Exhausted { .. }))
    )
}

fn sample(args: SampleArgs, argv: Vec<String>, timer: &Timer) -> Result<Outcome, CliError> {
    let epsilon: Epsilon = args.epsilon.parse()?;
    let problem = Problem::load(&args.input)?;
    let oracle = PrefixOracle::preprocess(&problem.a)?;
    let settings = sau_settings()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let sampler = match &problem.weights {
        Some((x, y)) => Sampler::General(GeneralSampler::prepare(
            &oracle, x, y, epsilon, &mut rng, &settings,
        )?),
        None => Sampler::Symmetric(
            SauSampler::prepare(&oracle, epsilon, &mut rng, &settings)?,
            &oracle,
        ),
    };
    let setup_queries = oracle.read_counter();
    let config = match &sampler {
        Sampler::Symmetric(s, _) => s.config().clone(),
        Sampler::General(g) => g.sampler().config().clone(),
    };

    let mut tally = Tally::new();
    let mut failures = 0u64;
    while tally.total() < args.samples {
        let drawn = match &sampler {
            Sampler::Symmetric(s, o) => s.sample(*o, &mut rng).map_err(CliError::from),
            Sampler::General(g) => g.sample(&mut rng).map_err(CliError::from),
        };
        match drawn {
            Ok(s) => tally.add((s.row, s.col)),
            Err(e) if exhausted(&e) => {
                failures += 1;
                if failures > 100 + args.samples {
                    return Err(CliError::TooManyFailures {
                        failures,
                        wanted: args.samples,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }

    let n = problem.n();
    let mut exact_total = None;
    let mut law = BTreeMap::new();
    if n <= EXACT_LAW_MAX_N {
        let total = problem.form_exact()?;
        for i in 0..n {
            for j in 0..n {
                let w = problem.cell_weight(i, j);
                if w > 0 {
                    law.insert((i, j), w as f64 / total as f64);
                }
            }
        }
        exact_total = Some(total);
    }
    let known = exact_total.is_some();
    let ratios = || {
        law.iter().map(|(k, p)| tally.frequency(k) / p).chain(
            tally
                .counts()
                .keys()
                .filter(|k| !law.contains_key(*k))
                .map(|_| f64::MAX),
        )
    };
    let entries = tally
        .counts()
        .iter()
        .map(|(&(row, col), &count)| EntryRow {
            row,
            col,
            value: problem.a.get(row, col),
            count,
            frequency: tally.frequency(&(row, col)),
            target: known.then(|| law.get(&(row, col)).copied().unwrap_or(0.0)),
        })
        .collect();
    let tv = known.then(|| tally.tv_distance(&law));

    let mut assertions = Vec::new();
    if args.assert {
        assertions.push(match tv {
            Some(tv) => Assertion::new(
                "tv_distance",
                tv < args.tv_max,
                format!("TV {tv} against bound {}", args.tv_max),
            ),
            None => Assertion::new(
                "tv_distance",
                false,
                format!("exact law is only computed for n <= {EXACT_LAW_MAX_N}"),
            ),
        });
    }

    let result = SampleResult {
        input: problem.summary(),
        samples: args.samples,
        exhausted_failures: failures,
        tau: config.tau,
        m_hat: config.m_hat,
        attempts_per_sample: config.gamma,
        setup_queries: setup_queries.into(),
        queries: oracle.read_counter().into(),
        exact_total,
        tv_distance: tv,
        chi_square: known.then(|| tally.chi_square(&law).into()),
        max_ratio: known.then(|| ratios().fold(0.0, f64::max)),
        min_ratio: known.then(|| ratios().fold(f64::MAX, f64::min)),
        entries,
    };
    finish(
        "sample",
        argv,
        Some(args.seed),
        Some(epsilon.to_string()),
        result,
        assertions,
        timer,
        args.output.json_out.as_deref(),
    )
}

// ---------------------------------------------------------------- regr-test

#[derive(Serialize)]
struct ColumnRow {
    col: usize,
    value: u64,
    count: u64,
    frequency: f64,
    target: f64,
}

#[derive(Serialize)]
struct RegrResult {
    n: usize,
    row: usize,
    lo: usize,
    hi: usize,
    samples: u64,
    range_mass: u64,
    query_budget: u64,
    max_queries_per_call: u64,
    queries: Queries,
    tv_distance: f64,
    chi_square: ChiSquareReport,
    columns: Vec<ColumnRow>,
}

fn regr_test(args: RegrTestArgs, argv: Vec<String>, timer: &Timer) -> Result<Outcome, CliError> {
    let a = read_matrix(&args.matrix)?;
    let n = a.n();
    let range = BitRange::new(args.lo.unwrap_or(0), args.hi.unwrap_or(n), n)?;
    if args.row >= n {
        return Err(CliError::Invalid(format!(
            "--row {} is out of range for n = {n}",
            args.row
        )));
    }
    let oracle = PrefixOracle::preprocess(&a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut tally = Tally::new();
    let mut max_queries = 0;
    for _ in 0..args.samples {
        let before = oracle.read_counter().total();
        let s = regr(&oracle, args.row, range, &mut rng)?;
        max_queries = max_queries.max(oracle.read_counter().total() - before);
        tally.add(s.col);
    }

    let mass: u64 = (range.lo()..range.hi()).map(|j| a.get(args.row, j)).sum();
    let law: BTreeMap<usize, f64> = (range.lo()..range.hi())
        .filter(|&j| a.get(args.row, j) > 0)
        .map(|j| (j, a.get(args.row, j) as f64 / mass as f64))
        .collect();
    let tv = tally.tv_distance(&law);
    let budget = query_budget(range.len());

    let mut assertions = Vec::new();
    if args.assert {
        assertions.push(Assertion::new(
            "tv_distance",
            tv < args.tv_max,
            format!("TV {tv} against bound {}", args.tv_max),
        ));
        assertions.push(Assertion::new(
            "query_budget",
            max_queries <= budget,
            format!("max {max_queries} queries per call, budget {budget}"),
        ));
    }

    let result = RegrResult {
        n,
        row: args.row,
        lo: range.lo(),
        hi: range.hi(),
        samples: args.samples,
        range_mass: mass,
        query_budget: budget,
        max_queries_per_call: max_queries,
        queries: oracle.read_counter().into(),
        tv_distance: tv,
        chi_square: tally.chi_square(&law).into(),
        columns: law
            .iter()
            .map(|(&col, &target)| ColumnRow {
                col,
                value: a.get(args.row, col),
                count: tally.count(&col),
                frequency: tally.frequency(&col),
                target,
            })
            .collect(),
    };
    finish(
        "regr-test",
        argv,
        Some(args.seed),
        None,
        result,
        assertions,
        timer,
        args.output.json_out.as_deref(),
    )
}

// ---------------------------------------------------------------- verify

#[derive(Serialize)]
struct VerifyResult {
    input: InputSummary,
    exact: u64,
    symmetric: bool,
}

fn verify(args: VerifyArgs, argv: Vec<String>, timer: &Timer) -> Result<Outcome, CliError> {
    let problem = Problem::load(&args.input)?;
    let result = VerifyResult {
        exact: problem.exact()?,
        symmetric: problem.a.is_symmetric(),
        input: problem.summary(),
    };
    finish(
        "verify",
        argv,
        None,
        None,
        result,
        vec![],
        timer,
        args.output.json_out.as_deref(),
    )
}
