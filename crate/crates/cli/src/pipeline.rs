//! Builds engine objects from a [`RunConfig`] and runs the two pipelines.

use std::time::Instant;

use riskagg::classical::{alg1_joint_samples, classical_tvar, classical_var, QuantileSource};
use riskagg::copula::{CopulaModel, DEFAULT_BOUNDS_RESOLUTION};
use riskagg::marginals::{discretize, select_truncation, MarginalSpec};
use riskagg::risk::{self, AggregationSetup, EstRmOptions};
use riskagg::special::{std_normal_pdf, std_normal_quantile};
use riskagg::{AggregationSetup64, CopulaModel64, RiskReport64, RngStream};

use crate::config::{CopulaKind, MarginalConfig, RunConfig};
use crate::CliResult;

pub fn build_copula(cfg: &RunConfig) -> CliResult<CopulaModel64> {
    let c = &cfg.copula;
    let model = match c.kind {
        CopulaKind::Independence => CopulaModel::independence(cfg.dim())?,
        CopulaKind::Gaussian => CopulaModel::gaussian(c.matrix.as_deref().unwrap_or_default())?,
        CopulaKind::StudentT => CopulaModel::student_t(
            c.dof.unwrap_or_default(),
            c.matrix.as_deref().unwrap_or_default(),
        )?,
    };
    Ok(model.with_clip(c.clip)?)
}

pub fn marginal_specs(cfg: &RunConfig) -> Vec<MarginalSpec<f64>> {
    cfg.marginals.iter().map(|m| m.spec).collect()
}

/// Grid range of a marginal: the configured range, or the default range
/// widened to cover the window `[-l, l]`.
pub fn grid_range(m: &MarginalConfig, l: f64) -> (f64, f64) {
    match m.range {
        Some([lo, hi]) => (lo, hi),
        None => {
            let (lo, hi) = m.spec.default_range();
            (lo.min(-l), hi.max(l))
        }
    }
}

/// Computes the copula bounds, picks the truncation windows for accuracy
/// `epsilon` and discretizes every marginal.
pub fn build_setup(cfg: &RunConfig, epsilon: f64) -> CliResult<AggregationSetup64> {
    let started = Instant::now();
    let mut copula = build_copula(cfg)?;
    copula.compute_bounds(DEFAULT_BOUNDS_RESOLUTION);
    let eps_m = risk::marginal_accuracy(epsilon, cfg.dim(), copula.c_prime_max()?);
    let marginals = cfg
        .marginals
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let l = select_truncation(&m.spec, eps_m)?.half_width();
            let (lo, hi) = grid_range(m, l);
            Ok((
                m.spec,
                discretize(&m.spec, m.grid_bits, lo, hi)?,
                cfg.smoothness_of(i),
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let setup = AggregationSetup::with_auto_windows(marginals, copula, epsilon)?;
    log::info!("setup: {:.3} s", started.elapsed().as_secs_f64());
    Ok(setup)
}

pub fn est_rm_options(cfg: &RunConfig, epsilon: f64) -> EstRmOptions<f64> {
    let mut opts = EstRmOptions::new(epsilon, cfg.run.delta, cfg.run.qae);
    opts.k_cap = cfg.run.k_cap;
    opts
}

#[derive(Debug, Clone)]
pub struct QuantumOutcome {
    pub var: RiskReport64,
    pub tvar: Option<RiskReport64>,
}

/// VaR, then TVaR starting from the estimated VaR when requested.
/// Streams: `("quantum-var", 0)` and `("quantum-tvar", 0)` under `root`.
pub fn run_quantum(
    cfg: &RunConfig,
    setup: &AggregationSetup64,
    epsilon: f64,
    with_tvar: bool,
    root: &RngStream,
) -> CliResult<QuantumOutcome> {
    let opts = est_rm_options(cfg, epsilon);
    let started = Instant::now();
    let var = risk::var(setup, cfg.risk.alpha, &opts, &root.child("quantum-var", 0))?;
    log::info!("quantum VaR: {:.3} s", started.elapsed().as_secs_f64());
    let tvar = if with_tvar {
        let started = Instant::now();
        let report = risk::tvar(
            setup,
            cfg.risk.alpha,
            var.value,
            &opts,
            &root.child("quantum-tvar", 0),
        )?;
        log::info!("quantum TVaR: {:.3} s", started.elapsed().as_secs_f64());
        Some(report)
    } else {
        None
    };
    Ok(QuantumOutcome { var, tvar })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalOutcome {
    pub var: f64,
    pub tvar: Option<f64>,
    pub samples: usize,
}

/// Sample-sort-rearrange baseline with `n` joint samples drawn from the
/// stream `("classical", 0)` under `root`.
pub fn run_classical(
    cfg: &RunConfig,
    n: usize,
    with_tvar: bool,
    root: &RngStream,
) -> CliResult<ClassicalOutcome> {
    let started = Instant::now();
    let copula = build_copula(cfg)?;
    let sm = alg1_joint_samples(
        &marginal_specs(cfg),
        &copula,
        n,
        QuantileSource::Empirical,
        &root.child("classical", 0),
    )?;
    let var = classical_var(&sm, cfg.risk.alpha)?;
    let tvar = if with_tvar {
        Some(classical_tvar(&sm, cfg.risk.alpha)?)
    } else {
        None
    };
    log::info!(
        "classical (N = {n}): {:.3} s",
        started.elapsed().as_secs_f64()
    );
    Ok(ClassicalOutcome {
        var,
        tvar,
        samples: n,
    })
}

/// Closed-form VaR and TVaR when every marginal is normal and the copula is
/// Gaussian or independent, so that the sum is normal itself.
pub fn analytic_reference(cfg: &RunConfig) -> Option<(f64, f64)> {
    let mut mu = Vec::with_capacity(cfg.dim());
    let mut sigma = Vec::with_capacity(cfg.dim());
    for m in &cfg.marginals {
        match m.spec {
            MarginalSpec::Normal { mu: a, sigma: b } => {
                mu.push(a);
                sigma.push(b);
            }
            _ => return None,
        }
    }
    let d = cfg.dim();
    let corr = |i: usize, j: usize| match cfg.copula.kind {
        CopulaKind::Gaussian => cfg.copula.matrix.as_ref().map(|m| m[i][j]),
        CopulaKind::Independence => Some(if i == j { 1.0 } else { 0.0 }),
        CopulaKind::StudentT => None,
    };
    let mut variance = 0.0;
    for i in 0..d {
        for j in 0..d {
            variance += sigma[i] * sigma[j] * corr(i, j)?;
        }
    }
    let mean: f64 = mu.iter().sum();
    let sd = variance.sqrt();
    let alpha = cfg.risk.alpha;
    let z = std_normal_quantile(alpha).ok()?;
    Some((mean + sd * z, mean + sd * std_normal_pdf(z) / (1.0 - alpha)))
}
