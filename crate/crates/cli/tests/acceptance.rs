//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use riskagg::copula::CopulaModel;
use riskagg::marginals::{discretize, product_expectation, MarginalSpec};
use riskagg::osde::{est_marg, probe_grid, sup_error, SmoothnessParams};
use riskagg::qae::SUCCESS_PROBABILITY;
use riskagg::risk::{est_rm, AggregationSetup, CdfSource, EstRmOptions, PayoffSpec};
use riskagg::special::{std_normal_cdf, TruncationWindow};
use riskagg::{QaeMode, RngStream};
use riskagg_cli::commands::{converge_rows, Sweep};
use riskagg_cli::config::RunConfig;
use riskagg_cli::pipeline::{build_setup, run_classical, run_quantum};
use riskagg_cli::validate::{
    amplitude_max, integral_recurrence_error, orthonormality_error, qae_min_coverage,
};

const VAR_REF: f64 = 4.029_352_713_918_58;
const TVAR_REF: f64 = 4.616_286_442_694_007;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn reference_config(qae: &str, seed: u64) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
        "marginals": [
            {{"family": "normal", "params": {{"mu": 0.0, "sigma": 1.0}}, "grid_bits": 10, "range": [-8.0, 8.0]}},
            {{"family": "normal", "params": {{"mu": 0.0, "sigma": 1.0}}, "grid_bits": 10, "range": [-8.0, 8.0]}}
        ],
        "copula": {{"kind": "gaussian", "matrix": [[1.0, 0.5], [0.5, 1.0]]}},
        "risk": {{"measure": "both", "alpha": 0.99}},
        "run": {{"mode": "both", "epsilon": 0.002, "delta": 0.05, "qae": "{qae}", "seed": {seed},
                 "classical_n": 1000000}}
    }}"#
    ))
    .expect("reference configuration is valid")
}

/// Least-squares slope of log y against log x.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn orthonormality() -> Outcome {
    let worst = orthonormality_error(30);
    outcome(
        worst <= 1e-8,
        format!("max |<h_k, h_l> - delta_kl| = {worst:.2e} (k, l <= 30)"),
    )
}

fn amplitude_bound() -> Outcome {
    let max = amplitude_max(10_000, 2718);
    let bound = std::f64::consts::PI.powf(-0.25) + 1e-12;
    outcome(
        max <= bound,
        format!("max |h_k(x)| = {max:.15} <= {bound:.15}"),
    )
}

fn integral_recurrence() -> Outcome {
    let worst = integral_recurrence_error(40, &[3.0, 5.0, 8.0], 100);
    outcome(
        worst <= 1e-8,
        format!("max deviation from quadrature {worst:.2e}"),
    )
}

fn qae_coverage() -> Outcome {
    let worst = qae_min_coverage(&[0.1, 0.25, 0.5, 0.9], &[16, 64, 256], 10_000, 31_415);
    let need = SUCCESS_PROBABILITY - 0.02;
    outcome(
        worst >= need,
        format!("smallest in-band fraction {worst:.4} >= {need:.4}"),
    )
}

fn statistical_cdf_bound() -> Outcome {
    let dm = discretize(&MarginalSpec::standard_normal(), 10, -8.0, 8.0).expect("grid");
    let w = TruncationWindow::new(4.0).expect("window");
    let probes = probe_grid(w, 400);
    let root = RngStream::new(5);
    let good = (0..100)
        .filter(|&r| {
            let (ec, _) = est_marg(
                &dm,
                31,
                w,
                0.05,
                0.1,
                QaeMode::Sampled,
                &root.child("run", r),
            )
            .expect("est_marg");
            sup_error(&ec, std_normal_cdf, &probes) <= 0.05
        })
        .count();
    outcome(
        good >= 90,
        format!("{good}/100 sampled runs within sup error 0.05"),
    )
}

fn target_expectation() -> Outcome {
    let spec = MarginalSpec::<f64>::standard_normal();
    let grid = discretize(&spec, 8, -8.0, 8.0).expect("grid");
    let sp = SmoothnessParams::default();
    let setup = AggregationSetup::with_auto_windows(
        vec![(spec, grid.clone(), sp), (spec, grid.clone(), sp)],
        CopulaModel::gaussian_2d(0.5).expect("copula"),
        0.01,
    )
    .expect("setup");
    let opts = EstRmOptions {
        cdf_source: CdfSource::Analytic,
        ..EstRmOptions::new(0.01, 0.05, QaeMode::Exact)
    };
    let grids = [grid.clone(), grid];
    let mut worst: f64 = 0.0;
    for payoff in [
        PayoffSpec::VarIndicator { l: 3.0 },
        PayoffSpec::VarIndicator { l: -1.0 },
        PayoffSpec::tvar_indicator(3.0, -16.0, 16.0).expect("payoff"),
    ] {
        let got = est_rm(&setup, &payoff, &opts, &RngStream::new(0))
            .expect("est_rm")
            .estimate;
        let want = product_expectation(&grids, |x| {
            let c = setup
                .copula()
                .density(&[spec.cdf(x[0]), spec.cdf(x[1])])
                .expect("density");
            payoff.eval(x) * c
        })
        .expect("product grid");
        worst = worst.max((got - want).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("max |est_rm - brute force| = {worst:.2e}"),
    )
}

fn end_to_end(measure_tvar: bool) -> Outcome {
    let cfg = reference_config("sampled", 42);
    let started = Instant::now();
    let setup = build_setup(&cfg, cfg.run.epsilon).expect("setup");
    let q = run_quantum(
        &cfg,
        &setup,
        cfg.run.epsilon,
        measure_tvar,
        &RngStream::new(cfg.run.seed),
    )
    .expect("quantum pipeline");
    let quantum_time = started.elapsed();
    let started = Instant::now();
    let c = run_classical(&cfg, 1_000_000, measure_tvar, &RngStream::new(cfg.run.seed))
        .expect("classical pipeline");
    let classical_time = started.elapsed();
    let (qv, cv, reference, qtol, ctol) = if measure_tvar {
        let t = q.tvar.as_ref().expect("tvar requested").value;
        (t, c.tvar.expect("tvar requested"), TVAR_REF, 0.20, 0.05)
    } else {
        (q.var.value, c.var, VAR_REF, 0.15, 0.03)
    };
    let passed = (qv - reference).abs() <= qtol
        && (cv - reference).abs() <= ctol
        && quantum_time < Duration::from_secs(15 * 60)
        && classical_time < Duration::from_secs(60);
    outcome(
        passed,
        format!(
            "quantum {qv:.4} (|err| {:.4} <= {qtol}, {:.1} s), classical {cv:.4} (|err| {:.4} <= {ctol}, {:.1} s), reference {reference:.4}",
            (qv - reference).abs(),
            quantum_time.as_secs_f64(),
            (cv - reference).abs(),
            classical_time.as_secs_f64()
        ),
    )
}

fn query_scaling() -> Outcome {
    let cfg = reference_config("sampled", 9);
    let eps = [0.1, 0.05, 0.02, 0.01];
    let rows = converge_rows(&cfg, &Sweep::Epsilon(eps.to_vec()), 1).expect("eps sweep");
    let inv_eps: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
    let queries: Vec<f64> = rows.iter().map(|r| r.queries_state_prep as f64).collect();
    let q_slope = loglog_slope(&inv_eps, &queries);

    let ns = [1_000usize, 10_000, 100_000, 1_000_000];
    let seeds = 50;
    let rows = converge_rows(&cfg, &Sweep::Samples(ns.to_vec()), seeds).expect("n sweep");
    let rmse: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.param == n as f64)
                .map(|r| r.abs_error * r.abs_error)
                .collect();
            (errs.iter().sum::<f64>() / errs.len() as f64).sqrt()
        })
        .collect();
    let n_f: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let rmse_slope = loglog_slope(&n_f, &rmse);
    let passed = (0.9..=1.4).contains(&q_slope) && (rmse_slope + 0.5).abs() <= 0.1;
    outcome(
        passed,
        format!(
            "quantum queries vs 1/eps slope {q_slope:.3} in [0.9, 1.4]; classical RMSE vs N slope {rmse_slope:.3} (samples vs 1/error {:.2})",
            -1.0 / rmse_slope
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = reference_config("exact", 123);
    let mut cfg_small = cfg.clone();
    cfg_small.run.classical_n = 100_000;
    let cfg_path = dir.path().join("exact.json");
    std::fs::write(
        &cfg_path,
        serde_json::to_string_pretty(&cfg_small).expect("json"),
    )
    .expect("write");
    let run = |threads: &str, name: &str| -> Vec<u8> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_riskagg"))
            .args(["run", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .env("RUST_LOG", "error")
            .status()
            .expect("binary runs");
        assert!(status.success(), "run with {threads} threads failed");
        std::fs::read(out).expect("report written")
    };
    let a = run("4", "a.json");
    let b = run("4", "b.json");
    let c = run("1", "c.json");
    outcome(
        a == b && a == c,
        format!(
            "repeat identical: {}, 1 vs 4 threads identical: {} ({} bytes)",
            a == b,
            a == c,
            a.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "hermite orthonormality",
            orthonormality,
            Duration::from_secs(10),
        ),
        ("amplitude bound", amplitude_bound, Duration::from_secs(1)),
        (
            "integral recurrence",
            integral_recurrence,
            Duration::from_secs(30),
        ),
        ("qae coverage", qae_coverage, Duration::from_secs(60)),
        (
            "statistical cdf bound",
            statistical_cdf_bound,
            Duration::from_secs(600),
        ),
        (
            "target expectation equivalence",
            target_expectation,
            Duration::from_secs(30),
        ),
        (
            "end-to-end var",
            || end_to_end(false),
            Duration::from_secs(16 * 60),
        ),
        (
            "end-to-end tvar",
            || end_to_end(true),
            Duration::from_secs(16 * 60),
        ),
        (
            "query scaling contrast",
            query_scaling,
            Duration::from_secs(30 * 60),
        ),
        ("determinism", determinism, Duration::from_secs(30 * 60)),
    ];
    let mut failures = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = check();
        let elapsed = started.elapsed();
        let passed = o.passed && elapsed <= *limit;
        failures += usize::from(!passed);
        println!(
            "{} {:>2} {name}: {} [{:.2} s, limit {} s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
