//! Command-line surface and the four commands.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use riskagg::marginals::{discretize, select_truncation};
use riskagg::osde::{choose_k, est_marg, probe_grid};
use riskagg::RngStream;
use serde::Serialize;

use crate::config::{PipelineMode, RunConfig};
use crate::pipeline::{analytic_reference, build_setup, grid_range, run_classical, run_quantum};
use crate::report::RunReport;
use crate::validate::{run_suite, SuiteOptions};
use crate::{CliError, CliResult};

/// Probe points written by `marginal`.
pub const MARGINAL_PROBES: usize = 400;

/// Joint samples behind the classical reference used by `converge` when no
/// closed form is available.
pub const REFERENCE_SAMPLES: usize = 1_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "riskagg",
    version,
    about = "Copula risk aggregation with simulated quantum Monte Carlo"
)]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides run.mode.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<PipelineMode>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the configured risk measures and write a JSON report.
    Run,
    /// Sweep accuracy (`eps=...`) or sample size (`n=...`) and write CSV rows.
    Converge {
        /// `eps=0.1,0.05,0.02` or `n=1000,10000`.
        #[arg(long)]
        sweep: String,
        /// Seeds per sweep point, counting up from the base seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Estimate one marginal CDF and dump it on a probe grid.
    Marginal {
        #[arg(long)]
        index: usize,
    },
    /// Run the built-in invariant suite.
    Validate {
        #[arg(long, default_value_t = 1e-8)]
        orthonormality_tol: f64,
    },
}

/// Parses arguments, configures logging and threads, runs the command and
/// returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<i32> {
    let pool = thread_pool(cli.threads)?;
    pool.install(|| match &cli.command {
        Command::Run => cmd_run(cli).map(|()| 0),
        Command::Converge { sweep, seeds } => cmd_converge(cli, sweep, *seeds).map(|()| 0),
        Command::Marginal { index } => cmd_marginal(cli, *index).map(|()| 0),
        Command::Validate { orthonormality_tol } => Ok(cmd_validate(&SuiteOptions {
            orthonormality_tol: *orthonormality_tol,
        })),
    })
}

fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start the thread pool: {e}")))
}

/// Loads the configuration and applies the `--seed` / `--mode` overrides.
fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(mode) = cli.mode {
        cfg.run.mode = mode;
    }
    Ok(cfg)
}

fn output(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            Box::new(io::BufWriter::new(File::create(p).map_err(|e| {
                CliError::Io(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

pub fn cmd_run(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let root = RngStream::new(cfg.run.seed);
    let measure = cfg.risk.measure;
    let (setup, quantum) = if cfg.run.mode.quantum() {
        let setup = build_setup(&cfg, cfg.run.epsilon)?;
        let q = run_quantum(&cfg, &setup, cfg.run.epsilon, measure.wants_tvar(), &root)?;
        (Some(setup), Some(q))
    } else {
        (None, None)
    };
    let classical = if cfg.run.mode.classical() {
        Some(run_classical(
            &cfg,
            cfg.run.classical_n,
            measure.wants_tvar(),
            &root,
        )?)
    } else {
        None
    };
    let report = RunReport::assemble(&cfg, setup.as_ref(), quantum.as_ref(), classical.as_ref());
    let mut w = output(cli.out.as_deref())?;
    w.write_all(report.to_json().as_bytes())?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Epsilon(Vec<f64>),
    Samples(Vec<usize>),
}

impl Sweep {
    pub fn parse(text: &str) -> CliResult<Self> {
        let usage = |msg: String| CliError::Usage(msg);
        let (key, values) = text.split_once('=').ok_or_else(|| {
            usage(format!(
                "sweep must look like eps=... or n=..., got {text:?}"
            ))
        })?;
        let items: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if items.is_empty() {
            return Err(usage("sweep has no points".into()));
        }
        match key.trim() {
            "eps" | "epsilon" => items
                .iter()
                .map(|s| match s.parse::<f64>() {
                    Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
                    _ => Err(usage(format!("sweep accuracy must lie in (0, 1), got {s}"))),
                })
                .collect::<CliResult<_>>()
                .map(Self::Epsilon),
            "n" | "N" => items
                .iter()
                .map(|s| match s.parse::<usize>() {
                    Ok(v) if v >= 10 => Ok(v),
                    _ => Err(usage(format!(
                        "sweep sample size must be an integer >= 10, got {s}"
                    ))),
                })
                .collect::<CliResult<_>>()
                .map(Self::Samples),
            other => Err(usage(format!(
                "unknown sweep parameter {other:?}; use eps or n"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeRow {
    pub param: f64,
    pub estimate: f64,
    pub abs_error: f64,
    pub queries_state_prep: u128,
    pub queries_rotation: u128,
    pub seconds: f64,
    pub seed: u64,
}

/// Reference (VaR, TVaR): the closed form when available, otherwise a large
/// classical run on the stream `("reference", 0)`.
fn reference_values(cfg: &RunConfig) -> CliResult<(f64, f64)> {
    if let Some(r) = analytic_reference(cfg) {
        return Ok(r);
    }
    log::info!("no closed form; using a classical reference with N = {REFERENCE_SAMPLES}");
    let root = RngStream::new(cfg.run.seed).child("reference", 0);
    let c = run_classical(cfg, REFERENCE_SAMPLES, true, &root)?;
    Ok((c.var, c.tvar.unwrap_or(c.var)))
}

/// One row per (sweep point, seed). TVaR is tracked when it is the only
/// configured measure, VaR otherwise.
pub fn converge_rows(cfg: &RunConfig, sweep: &Sweep, seeds: u64) -> CliResult<Vec<ConvergeRow>> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let track_tvar = !cfg.risk.measure.wants_var();
    let (ref_var, ref_tvar) = reference_values(cfg)?;
    let reference = if track_tvar { ref_tvar } else { ref_var };
    let mut rows = Vec::new();
    match sweep {
        Sweep::Epsilon(eps) => {
            if !cfg.run.mode.quantum() {
                return Err(CliError::Usage(
                    "an eps sweep needs mode quantum or both".into(),
                ));
            }
            for &e in eps {
                let setup = build_setup(cfg, e)?;
                for s in 0..seeds {
                    let seed = cfg.run.seed.wrapping_add(s);
                    let started = Instant::now();
                    let q = run_quantum(cfg, &setup, e, track_tvar, &RngStream::new(seed))?;
                    let (estimate, ledger) = match &q.tvar {
                        Some(t) => (t.value, q.var.total_queries + t.total_queries),
                        None => (q.var.value, q.var.total_queries),
                    };
                    rows.push(ConvergeRow {
                        param: e,
                        estimate,
                        abs_error: (estimate - reference).abs(),
                        queries_state_prep: ledger.state_prep_queries,
                        queries_rotation: ledger.rotation_queries,
                        seconds: started.elapsed().as_secs_f64(),
                        seed,
                    });
                }
            }
        }
        Sweep::Samples(ns) => {
            if !cfg.run.mode.classical() {
                return Err(CliError::Usage(
                    "an n sweep needs mode classical or both".into(),
                ));
            }
            for &n in ns {
                for s in 0..seeds {
                    let seed = cfg.run.seed.wrapping_add(s);
                    let started = Instant::now();
                    let c = run_classical(cfg, n, track_tvar, &RngStream::new(seed))?;
                    let estimate = c.tvar.unwrap_or(c.var);
                    rows.push(ConvergeRow {
                        param: n as f64,
                        estimate,
                        abs_error: (estimate - reference).abs(),
                        queries_state_prep: n as u128,
                        queries_rotation: 0,
                        seconds: started.elapsed().as_secs_f64(),
                        seed,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn cmd_converge(cli: &Cli, sweep: &str, seeds: u64) -> CliResult<()> {
    let sweep = Sweep::parse(sweep)?;
    let cfg = load_config(cli)?;
    let rows = converge_rows(&cfg, &sweep, seeds)?;
    let mut w = csv::Writer::from_writer(output(cli.out.as_deref())?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalRow {
    pub x: f64,
    #[serde(rename = "F_hat")]
    pub f_hat: f64,
    #[serde(rename = "F_true")]
    pub f_true: f64,
    pub abs_err: f64,
}

/// Path of the coefficient record written next to the `marginal` CSV.
pub fn coefficients_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("coeffs.json")
}

/// Estimates marginal `index` at the configured accuracy on the stream
/// `("marginal", index)` and writes the probe CSV and coefficient record.
pub fn cmd_marginal(cli: &Cli, index: usize) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| CliError::Usage("marginal needs --out <csv path>".into()))?;
    let m = cfg.marginals.get(index).ok_or_else(|| {
        CliError::Usage(format!(
            "marginal index {index} out of range; the configuration has {}",
            cfg.dim()
        ))
    })?;
    let eps = cfg.run.epsilon;
    let window = select_truncation(&m.spec, eps)?;
    let (lo, hi) = grid_range(m, window.half_width());
    let dm = discretize(&m.spec, m.grid_bits, lo, hi)?;
    let order = choose_k(window, cfg.smoothness_of(index), eps, cfg.run.k_cap)?;
    let started = Instant::now();
    let (ec, ledger) = est_marg(
        &dm,
        order.k,
        window,
        eps,
        cfg.run.delta,
        cfg.run.qae,
        &RngStream::new(cfg.run.seed).child("marginal", index as u64),
    )?;
    log::info!(
        "marginal {index}: K = {}, L = {}, {} state-preparation queries, {:.3} s",
        order.k,
        window.half_width(),
        ledger.state_prep_queries,
        started.elapsed().as_secs_f64()
    );
    let mut w = csv::Writer::from_writer(output(Some(out))?);
    for x in probe_grid(window, MARGINAL_PROBES) {
        let f_hat = ec.eval_cdf(x);
        let f_true = m.spec.cdf(x);
        w.serialize(MarginalRow {
            x,
            f_hat,
            f_true,
            abs_err: (f_hat - f_true).abs(),
        })?;
    }
    w.flush()?;
    let coeffs = serde_json::to_string_pretty(&ec).expect("coefficients serialize");
    std::fs::write(coefficients_path(out), coeffs + "\n")?;
    Ok(())
}

/// Prints one line per property; exit 1 if any fails.
pub fn cmd_validate(opts: &SuiteOptions) -> i32 {
    let checks = run_suite(opts);
    let mut stdout = io::stdout().lock();
    for c in &checks {
        let _ = writeln!(stdout, "{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(
        stdout,
        "{} of {} properties passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        assert_eq!(
            Sweep::parse("eps=0.1, 0.05").unwrap(),
            Sweep::Epsilon(vec![0.1, 0.05])
        );
        assert_eq!(
            Sweep::parse("n=1000,10000").unwrap(),
            Sweep::Samples(vec![1000, 10000])
        );
        for bad in ["eps=", "n=5", "eps=2", "k=1", "0.1,0.2"] {
            assert!(
                matches!(Sweep::parse(bad), Err(CliError::Usage(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn coefficient_path_sits_beside_csv() {
        assert_eq!(
            coefficients_path(Path::new("/tmp/m0.csv")),
            PathBuf::from("/tmp/m0.coeffs.json")
        );
    }
}
