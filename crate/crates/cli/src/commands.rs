use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use shsk::analysis::{self, RateCertificate};
use shsk::problems::matrix_market::read_matrix_market;
use shsk::problems::{default_nnz, gen_gaussian, plant_solution};
use shsk::solvers::{run_with, ConvergenceHistory, RecordOptions, RunOutcome, StopCriteria};
use shsk::{Problem, RegParam, WeightStrategy};

use crate::{BenchArgs, BoundsArgs, GenerateArgs, RateCheck, SolveArgs, StopArgs};

pub const BENCH_HEADER: &str = "bundle,strategy,IT,CPU_s,final_rse,stop_reason";

/// Bad flag combinations that clap cannot express; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load(dir: &Path) -> Result<Problem> {
    Problem::load_bundle(dir).with_context(|| format!("loading bundle {}", dir.display()))
}

fn stop_criteria(args: &StopArgs) -> Result<StopCriteria> {
    StopCriteria::new(args.max_iters, args.rse_tol, args.res_tol).map_err(|e| usage(e.to_string()))
}

fn strategy(name: &str, theta: Option<f64>, seed: u64) -> Result<WeightStrategy> {
    WeightStrategy::from_name(name, theta, seed).map_err(|e| usage(e.to_string()))
}

fn fmt_rse(rse: Option<f64>) -> String {
    rse.map(|v| format!("{v:.6e}")).unwrap_or_default()
}

pub fn generate(args: &GenerateArgs) -> Result<ExitCode> {
    let lambda = RegParam::new(args.lambda).map_err(|e| usage(e.to_string()))?;
    let problem = match (&args.mtx, args.m, args.n) {
        (Some(path), _, _) => {
            let matrix = read_matrix_market(path)?;
            let nnz = args.nnz.unwrap_or_else(|| default_nnz(matrix.ncols()));
            let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            plant_solution(matrix, nnz, args.seed, &label)?
        }
        (None, Some(m), Some(n)) => gen_gaussian(m, n, args.nnz.unwrap_or_else(|| default_nnz(n)), args.seed)?,
        _ => bail!(usage("either --mtx or both --m and --n are required")),
    };
    let mut problem = problem.with_lambda(lambda);
    if args.noise > 0.0 {
        // noise draws use a stream separate from the matrix and solution
        problem = problem.with_noise(args.noise, args.seed.wrapping_add(1))?;
    }
    problem.save_bundle(&args.out)?;
    let nnz = problem.meta().planted_nnz.unwrap_or_default();
    println!(
        "{}: m={} n={} nnz={} |b|={:e}",
        args.out.display(),
        problem.nrows(),
        problem.ncols(),
        nnz,
        problem.rhs_norm()
    );
    Ok(ExitCode::SUCCESS)
}

fn certificate(problem: &Problem, n_limit: usize) -> Result<RateCertificate> {
    let x_hat = problem.reference().context("bundle has no reference solution (xhat.txt)")?;
    if problem.ncols() > n_limit {
        bail!(
            "sigma_tilde_min not computable: n = {} exceeds the enumeration limit {n_limit}",
            problem.ncols()
        );
    }
    Ok(RateCertificate::compute(problem.matrix(), x_hat, problem.lambda(), n_limit)?)
}

pub fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let stop = stop_criteria(&args.stop)?;
    let rule = strategy(&args.strategy, args.theta, args.seed)?;
    let problem = load(&args.bundle)?;
    let cert = if args.certificates {
        if args.no_bregman {
            bail!(usage("--certificates needs the bregman column; drop --no-bregman"));
        }
        Some(certificate(&problem, args.n_limit)?)
    } else {
        None
    };
    let partial = matches!(rule, WeightStrategy::PartialResidual { .. });
    let residual = matches!(rule, WeightStrategy::Residual);
    let label = rule.label();
    let record = RecordOptions {
        bregman: !args.no_bregman,
        selection: partial && cert.is_some(),
    };
    let out = run_with(&problem, rule, &stop, record)?;
    if let Some(path) = &args.history {
        out.history
            .write_csv(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(cert) = cert {
        let cert = if partial {
            cert.with_per_step_q(problem.matrix(), &out.history)?
        } else {
            cert
        };
        let report = analysis::verify_certificates(&out.history, &cert)?;
        let mut line = format!("certificate: decrease_violations={}", report.decrease.len());
        if residual {
            write!(line, " residual_rate_violations={}", report.residual_rate.len())?;
        }
        if partial {
            write!(line, " partial_rate_violations={}", report.partial_rate_violations())?;
        }
        println!("{line}");
    }
    println!("{}", summary_line(&label, &out));
    Ok(ExitCode::SUCCESS)
}

fn summary_line(label: &str, out: &RunOutcome) -> String {
    format!(
        "{label},{},{:.6},{},{}",
        out.iterations(),
        out.elapsed,
        fmt_rse(out.final_rse()),
        out.stop_reason
    )
}

/// Parses `shskr,shskpr:0.5,rsk` into (name, theta) pairs.
pub fn parse_strategy_list(list: &str) -> Result<Vec<(String, Option<f64>)>> {
    let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        bail!(usage("--strategies must name at least one strategy"));
    }
    items
        .into_iter()
        .map(|item| {
            let (name, theta) = match item.split_once(':') {
                Some((name, t)) => {
                    let theta: f64 = t.parse().map_err(|_| usage(format!("bad theta in `{item}`")))?;
                    (name, Some(theta))
                }
                None => (item, None),
            };
            strategy(name, theta, 0)?;
            Ok((name.to_string(), theta))
        })
        .collect()
}

struct Cell {
    bundle: usize,
    name: String,
    theta: Option<f64>,
}

pub fn bench(args: &BenchArgs) -> Result<ExitCode> {
    let stop = stop_criteria(&args.stop)?;
    let strategies = parse_strategy_list(&args.strategies)?;
    if args.repeats == 0 {
        bail!(usage("--repeats must be at least 1"));
    }
    let problems = args.bundles.iter().map(|b| load(b)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<Cell> = (0..problems.len())
        .flat_map(|bundle| {
            strategies.iter().map(move |(name, theta)| Cell {
                bundle,
                name: name.clone(),
                theta: *theta,
            })
        })
        .collect();
    let rows = cells
        .par_iter()
        .map(|cell| bench_cell(&problems[cell.bundle], cell, args, &stop))
        .collect::<Result<Vec<_>>>()?;

    let mut table = String::from(BENCH_HEADER);
    table.push('\n');
    for (cell, row) in cells.iter().zip(rows) {
        writeln!(table, "{},{row}", args.bundles[cell.bundle].display())?;
    }
    match &args.out {
        Some(path) => fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// One table row without the bundle column. Randomized strategies run
/// `repeats` times with consecutive seeds and report the run with the median
/// iteration count (the lower median for even counts).
fn bench_cell(problem: &Problem, cell: &Cell, args: &BenchArgs, stop: &StopCriteria) -> Result<String> {
    let record = RecordOptions {
        bregman: false,
        selection: false,
    };
    let first = strategy(&cell.name, cell.theta, args.seed)?;
    let repeats = if first.is_randomized() { args.repeats } else { 1 };
    let label = first.label();
    let mut runs = vec![run_with(problem, first, stop, record)?];
    for j in 1..repeats {
        let rule = strategy(&cell.name, cell.theta, args.seed.wrapping_add(j as u64))?;
        runs.push(run_with(problem, rule, stop, record)?);
    }
    runs.sort_by_key(RunOutcome::iterations);
    Ok(summary_line(&label, &runs[(runs.len() - 1) / 2]))
}

pub fn bounds(args: &BoundsArgs) -> Result<ExitCode> {
    let problem = load(&args.bundle)?;
    if problem.reference().is_none() {
        bail!("bundle has no reference solution (xhat.txt)");
    }
    if problem.ncols() > args.n_limit {
        println!(
            "sigma_tilde_min = not computable (n = {} exceeds the enumeration limit {})",
            problem.ncols(),
            args.n_limit
        );
        return Ok(ExitCode::FAILURE);
    }
    let cert = certificate(&problem, args.n_limit)?;
    println!("sigma_tilde_min = {}", cert.sigma_tilde_min);
    println!("x_hat_min = {}", cert.x_hat_min);
    println!("nu = {}", cert.nu);
    println!("q = {}", cert.q);
    println!("q_hat = {}", cert.q_hat);
    match cert.q_tilde {
        Some(v) => println!("q_tilde = {v}"),
        None => println!("q_tilde = not applicable (rank deficient)"),
    }
    let Some(path) = &args.history else {
        return Ok(ExitCode::SUCCESS);
    };
    let history = ConvergenceHistory::read_csv(path).with_context(|| format!("reading {}", path.display()))?;
    let report = analysis::verify_certificates(&history, &cert)?;
    println!("steps_checked = {}", report.steps_checked);
    println!("decrease_violations = {}", report.decrease.len());
    let mut bad = report.decrease.len();
    if args.rate == RateCheck::Residual {
        println!("residual_rate_violations = {}", report.residual_rate.len());
        bad += report.residual_rate.len();
    }
    for v in report.decrease.iter().chain(&report.residual_rate).take(5) {
        println!("violation k={} D_next={:e} bound={:e}", v.k, v.observed, v.bound);
    }
    Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
