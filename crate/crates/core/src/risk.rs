//! Risk aggregation: the target expectation 𝔼^ind[g(X) c(F̂(X))], tail
//! probabilities, VaR by bisection and TVaR by an affinely rescaled payoff.
//!
//! Expectations under the dependent joint law are rewritten as expectations
//! under the independent product of the marginal grids,
//!
//! ```text
//! 𝔼[g(X)] = 𝔼^ind[g(X) c(F_1(X_1), …, F_d(X_d))],
//! ```
//!
//! with the unknown CDFs replaced by their Hermite-series estimates and the
//! integrand scaled by 1/c_max so it is a valid payoff in [0, 1].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaModel;
use crate::error::{Error, Result};
use crate::marginals::{
    product_expectation_indexed, select_truncation, DiscretizedMarginal, MarginalSpec,
};
use crate::osde::{choose_k, est_marg, probe_grid, sup_error, SmoothnessParams, DEFAULT_K_CAP};
use crate::qae::{qmci, QaeMode, QueryLedger};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::special::TruncationWindow;

/// Largest number of risk variables handled by the product-grid payoff.
pub const MAX_DIM: usize = 12;

/// Probe points used for the per-marginal sup-norm diagnostic.
pub const SUP_PROBES: usize = 400;

/// One risk variable: analytic law, grid, truncation window and smoothness.
#[derive(Debug, Clone)]
pub struct MarginalSetup<T: Scalar> {
    pub spec: MarginalSpec<T>,
    pub grid: DiscretizedMarginal<T>,
    pub window: TruncationWindow<T>,
    pub smoothness: SmoothnessParams<T>,
}

/// Marginals and copula of an aggregation problem.
#[derive(Debug, Clone)]
pub struct AggregationSetup<T: Scalar> {
    marginals: Vec<MarginalSetup<T>>,
    copula: CopulaModel<T>,
}

impl<T: Scalar> AggregationSetup<T> {
    pub fn new(marginals: Vec<MarginalSetup<T>>, copula: CopulaModel<T>) -> Result<Self> {
        if marginals.is_empty() || marginals.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "number of marginals must lie in [1, {MAX_DIM}], got {}",
                marginals.len()
            )));
        }
        if copula.dim() != marginals.len() {
            return Err(Error::DimensionMismatch {
                expected: marginals.len(),
                got: copula.dim(),
            });
        }
        for m in &marginals {
            m.spec.validate()?;
            m.smoothness.validate()?;
            m.grid.check_spans(m.window)?;
        }
        Ok(Self { marginals, copula })
    }

    /// Builds a setup whose windows satisfy the tail condition at the
    /// per-marginal accuracy that [`est_rm`] will use for `epsilon`.
    /// Copula bounds are computed first if they are not yet set.
    pub fn with_auto_windows(
        marginals: Vec<(MarginalSpec<T>, DiscretizedMarginal<T>, SmoothnessParams<T>)>,
        mut copula: CopulaModel<T>,
        epsilon: T,
    ) -> Result<Self> {
        if copula.bounds().is_none() {
            copula.compute_bounds(crate::copula::DEFAULT_BOUNDS_RESOLUTION);
        }
        let eps_m = marginal_accuracy(epsilon, marginals.len(), copula.c_prime_max()?);
        let marginals = marginals
            .into_iter()
            .map(|(spec, grid, smoothness)| {
                Ok(MarginalSetup {
                    window: select_truncation(&spec, eps_m)?,
                    spec,
                    grid,
                    smoothness,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(marginals, copula)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalSetup<T>] {
        &self.marginals
    }

    pub fn copula(&self) -> &CopulaModel<T> {
        &self.copula
    }

    /// (Σ_i x_i^{(0)}, Σ_i x_i^{(N_i−1)}), the range of the grid sum S.
    pub fn sum_range(&self) -> (T, T) {
        self.marginals
            .iter()
            .fold((T::zero(), T::zero()), |(lo, hi), m| {
                (lo + m.grid.lo(), hi + m.grid.hi())
            })
    }

    /// Largest grid spacing across the marginals.
    pub fn coarsest_spacing(&self) -> T {
        self.marginals
            .iter()
            .map(|m| m.grid.spacing())
            .fold(T::zero(), T::max)
    }
}

/// Accuracy ε/(2 d c'_max) demanded of each marginal CDF, capped at ½ so
/// that nearly flat copulas still yield a valid accuracy.
pub fn marginal_accuracy<T: Scalar>(epsilon: T, d: usize, c_prime_max: T) -> T {
    (epsilon / (T::lit(2.0) * T::from_usize_lossy(d) * c_prime_max)).min(T::lit(0.5))
}

/// Payoff g(x) with values in [0, 1].
pub type PayoffFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Clone)]
pub enum PayoffSpec<T: Scalar> {
    /// 1{s ≥ l}, s = Σ x_i.
    VarIndicator { l: T },
    /// ((s − s_lo)/(s_hi − s_lo)) · 1{s ≥ l}.
    TvarIndicator { l: T, s_lo: T, s_hi: T },
    /// Any function of the grid point; the caller guarantees the codomain.
    Custom(PayoffFn<T>),
}

impl<T: Scalar> fmt::Debug for PayoffSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::VarIndicator { l } => f.debug_struct("VarIndicator").field("l", l).finish(),
            Self::TvarIndicator { l, s_lo, s_hi } => f
                .debug_struct("TvarIndicator")
                .field("l", l)
                .field("s_lo", s_lo)
                .field("s_hi", s_hi)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Scalar> PayoffSpec<T> {
    pub fn tvar_indicator(l: T, s_lo: T, s_hi: T) -> Result<Self> {
        if !(s_lo < s_hi) {
            return Err(Error::InvalidRange {
                lo: s_lo.to_f64_lossy(),
                hi: s_hi.to_f64_lossy(),
            });
        }
        Ok(Self::TvarIndicator { l, s_lo, s_hi })
    }

    pub fn custom<F: Fn(&[T]) -> T + Send + Sync + 'static>(f: F) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[T]) -> T {
        match self {
            Self::VarIndicator { l } => {
                if x.iter().copied().sum::<T>() >= *l {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::TvarIndicator { l, s_lo, s_hi } => {
                let s: T = x.iter().copied().sum();
                if s >= *l {
                    (s - *s_lo) / (*s_hi - *s_lo)
                } else {
                    T::zero()
                }
            }
            Self::Custom(f) => f(x),
        }
    }
}

/// Where the CDFs fed to the copula come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfSource {
    /// Hermite-series estimates from simulated QMCI.
    #[default]
    Estimated,
    /// The analytic marginal CDFs (no marginal queries are charged).
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstRmOptions<T: Scalar> {
    pub epsilon: T,
    pub delta: T,
    pub mode: QaeMode,
    pub k_cap: usize,
    pub cdf_source: CdfSource,
}

impl<T: Scalar> EstRmOptions<T> {
    pub fn new(epsilon: T, delta: T, mode: QaeMode) -> Self {
        Self {
            epsilon,
            delta,
            mode,
            k_cap: DEFAULT_K_CAP,
            cdf_source: CdfSource::Estimated,
        }
    }

    fn with_accuracy(&self, epsilon: T, delta: T) -> Self {
        Self {
            epsilon,
            delta,
            ..*self
        }
    }
}

/// Per-marginal outcome of the CDF estimation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MarginalDiagnostics<T: Scalar> {
    #[serde(rename = "K")]
    pub k: usize,
    pub k_capped: bool,
    #[serde(rename = "L")]
    pub l: T,
    /// max |F̂ − F| over a probe grid on [−L − 1, L + 1].
    pub sup_error: T,
    pub ledger: QueryLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstRmOutcome<T: Scalar> {
    /// c_max × the QMCI estimate, an estimate of 𝔼[g(X)].
    pub estimate: T,
    /// Exact amplitude 𝔼^ind[Φ̂] handed to the final QMCI.
    pub amplitude: T,
    pub ledger: QueryLedger,
    pub marginals: Vec<MarginalDiagnostics<T>>,
    /// Grid cells where Φ̂ exceeded 1 and was clipped.
    pub phi_clipped: u64,
}

struct MarginalStage<T: Scalar> {
    latent: Vec<T>,
    diagnostics: MarginalDiagnostics<T>,
}

fn check_unit<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v < T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0,1), got {v}")))
    }
}

fn estimate_marginal<T: Scalar>(
    setup: &AggregationSetup<T>,
    i: usize,
    opts: &EstRmOptions<T>,
    eps_m: T,
    delta_m: T,
    stream: &RngStream,
) -> Result<MarginalStage<T>> {
    let m = &setup.marginals[i];
    let copula = &setup.copula;
    match opts.cdf_source {
        CdfSource::Analytic => Ok(MarginalStage {
            latent: m
                .grid
                .grid()
                .iter()
                .map(|&x| copula.latent(m.spec.cdf(x)))
                .collect(),
            diagnostics: MarginalDiagnostics {
                k: 0,
                k_capped: false,
                l: m.window.half_width(),
                sup_error: T::zero(),
                ledger: QueryLedger::default(),
            },
        }),
        CdfSource::Estimated => {
            let order = choose_k(m.window, m.smoothness, eps_m, opts.k_cap)?;
            let (ec, ledger) = est_marg(
                &m.grid,
                order.k,
                m.window,
                eps_m,
                delta_m,
                opts.mode,
                &stream.child("marginal", i as u64),
            )?;
            let probes = probe_grid(m.window, SUP_PROBES);
            Ok(MarginalStage {
                latent: m
                    .grid
                    .grid()
                    .iter()
                    .map(|&x| copula.latent(ec.eval_cdf_clamped(x)))
                    .collect(),
                diagnostics: MarginalDiagnostics {
                    k: order.k,
                    k_capped: order.capped,
                    l: m.window.half_width(),
                    sup_error: sup_error(&ec, |x| m.spec.cdf(x), &probes),
                    ledger,
                },
            })
        }
    }
}

/// Estimates 𝔼[g(X)] under the copula model.
///
/// Each marginal CDF is estimated at accuracy ε/(2dc'_max) and confidence
/// δ/(2d) (series order from [`choose_k`]); the final QMCI over the product
/// grid runs at accuracy ε/(2c_max) and confidence δ/2. One joint state
/// preparation is charged as d single-marginal preparations.
///
/// Streams: marginal i uses `("marginal", i)`, the final QMCI `("final", 0)`.
pub fn est_rm<T: Scalar>(
    setup: &AggregationSetup<T>,
    payoff: &PayoffSpec<T>,
    opts: &EstRmOptions<T>,
    stream: &RngStream,
) -> Result<EstRmOutcome<T>> {
    check_unit("epsilon", opts.epsilon)?;
    check_unit("delta", opts.delta)?;
    let d = setup.dim();
    let c_max = setup.copula.c_max()?;
    let c_prime = setup.copula.c_prime_max()?;
    let dt = T::from_usize_lossy(d);
    let eps_m = marginal_accuracy(opts.epsilon, d, c_prime);
    let delta_m = opts.delta / (T::lit(2.0) * dt);

    let stages = (0..d)
        .into_par_iter()
        .map(|i| estimate_marginal(setup, i, opts, eps_m, delta_m, stream))
        .collect::<Result<Vec<_>>>()?;

    let weights: Vec<&[T]> = setup.marginals.iter().map(|m| m.grid.weights()).collect();
    let clipped = AtomicU64::new(0);
    let amplitude = product_expectation_indexed(&weights, |idx| {
        let mut x = [T::zero(); MAX_DIM];
        for (i, &j) in idx.iter().enumerate() {
            x[i] = setup.marginals[i].grid.grid()[j];
        }
        let g = payoff.eval(&x[..d]);
        if g == T::zero() {
            return T::zero();
        }
        let mut z = [T::zero(); MAX_DIM];
        for (i, &j) in idx.iter().enumerate() {
            z[i] = stages[i].latent[j];
        }
        let phi = g * setup.copula.density_latent(&z[..d]) / c_max;
        if phi > T::one() {
            clipped.fetch_add(1, Ordering::Relaxed);
            T::one()
        } else {
            phi.max(T::zero())
        }
    })?;

    let final_run = qmci(
        amplitude,
        opts.epsilon / (T::lit(2.0) * c_max),
        opts.delta * T::lit(0.5),
        opts.mode,
        &stream.child("final", 0),
    )?;
    let marginal_ledger: QueryLedger = stages.iter().map(|s| s.diagnostics.ledger).sum();
    let phi_clipped = clipped.into_inner();
    if phi_clipped > 0 {
        log::warn!("{phi_clipped} grid cells had a payoff above 1 and were clipped");
    }
    Ok(EstRmOutcome {
        estimate: c_max * final_run.estimate,
        amplitude,
        ledger: marginal_ledger + final_run.ledger.scale_state_prep(d as u128),
        marginals: stages.into_iter().map(|s| s.diagnostics).collect(),
        phi_clipped,
    })
}

/// Estimated Pr(S ≥ l).
pub fn tail_prob<T: Scalar>(
    setup: &AggregationSetup<T>,
    l: T,
    opts: &EstRmOptions<T>,
    stream: &RngStream,
) -> Result<EstRmOutcome<T>> {
    est_rm(setup, &PayoffSpec::VarIndicator { l }, opts, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMeasure {
    Var,
    Tvar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RiskDiagnostics<T: Scalar> {
    pub marginals: Vec<MarginalDiagnostics<T>>,
    pub c_max: T,
    pub c_prime_max: T,
    pub epsilon: T,
    pub delta: T,
    /// Accuracy demanded of each marginal CDF.
    pub marginal_epsilon: T,
    pub seed: u64,
    /// Number of est_rm invocations.
    pub est_rm_calls: usize,
    pub phi_clipped: u64,
    /// VaR: bisection stopping width.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tolerance: Option<T>,
    /// TVaR: 𝔼[S 1{S ≥ l}].
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail_expectation: Option<T>,
    /// TVaR: 𝔼[S 1{S ≥ l}] / (1 − α).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail_expectation_over_one_minus_alpha: Option<T>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RiskReport<T: Scalar> {
    pub measure: RiskMeasure,
    pub alpha: T,
    pub value: T,
    /// VaR: estimated Pr(S ≥ value). TVaR: estimated Pr(S ≥ threshold).
    pub tail_prob_at_value: T,
    /// TVaR: the VaR level the tail starts from.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<T>,
    pub total_queries: QueryLedger,
    pub diagnostics: RiskDiagnostics<T>,
}

/// One warning per marginal whose series order hit the cap.
fn note_capped_orders<T: Scalar>(diag: &mut RiskDiagnostics<T>) {
    for (i, m) in diag.marginals.iter().enumerate() {
        if m.k_capped {
            let msg = format!("marginal {i}: series order capped at K = {}", m.k);
            log::warn!("{msg}");
            diag.warnings.push(msg);
        }
    }
}

fn base_diagnostics<T: Scalar>(
    setup: &AggregationSetup<T>,
    opts: &EstRmOptions<T>,
    stream: &RngStream,
) -> Result<RiskDiagnostics<T>> {
    let c_prime_max = setup.copula.c_prime_max()?;
    Ok(RiskDiagnostics {
        marginals: Vec::new(),
        c_max: setup.copula.c_max()?,
        c_prime_max,
        epsilon: opts.epsilon,
        delta: opts.delta,
        marginal_epsilon: marginal_accuracy(opts.epsilon, setup.dim(), c_prime_max),
        seed: stream.seed(),
        est_rm_calls: 0,
        phi_clipped: 0,
        tolerance: None,
        tail_expectation: None,
        tail_expectation_over_one_minus_alpha: None,
        warnings: Vec::new(),
    })
}

/// Number of bisection steps that shrink the grid-sum range below `tol`.
pub fn bisection_steps<T: Scalar>(setup: &AggregationSetup<T>, tol: T) -> usize {
    let (lo, hi) = setup.sum_range();
    ((hi - lo) / tol).to_f64_lossy().log2().ceil().max(1.0) as usize
}

fn check_bracket<T: Scalar>(tail_at_lo: T, target: T) -> Result<()> {
    if tail_at_lo <= target {
        return Err(Error::BracketFailure {
            tail: tail_at_lo.to_f64_lossy(),
            target: target.to_f64_lossy(),
        });
    }
    Ok(())
}

/// VaR_S(α): the smallest l (to within the coarsest grid spacing) with
/// Pr(S ≥ l) ≤ 1 − α, found by bisection over the grid-sum range.
///
/// `opts.epsilon` is the accuracy of each tail-probability probe; δ is split
/// evenly over the bracket check and the bisection probes. Probe p uses the
/// child stream `("probe", p)`, p = 0 being the bracket check.
pub fn var<T: Scalar>(
    setup: &AggregationSetup<T>,
    alpha: T,
    opts: &EstRmOptions<T>,
    stream: &RngStream,
) -> Result<RiskReport<T>> {
    check_unit("alpha", alpha)?;
    let mut diag = base_diagnostics(setup, opts, stream)?;
    let tol = setup.coarsest_spacing();
    let steps = bisection_steps(setup, tol);
    let probe_opts = opts.with_accuracy(opts.epsilon, opts.delta / T::from_usize_lossy(steps + 1));
    let target = T::one() - alpha;
    let (mut lo, mut hi) = setup.sum_range();
    let mut ledger = QueryLedger::default();
    let mut record = |outcome: &EstRmOutcome<T>, diag: &mut RiskDiagnostics<T>| {
        ledger += outcome.ledger;
        diag.est_rm_calls += 1;
        diag.phi_clipped += outcome.phi_clipped;
        diag.marginals = outcome.marginals.clone();
    };

    let bracket = tail_prob(setup, lo, &probe_opts, &stream.child("probe", 0))?;
    record(&bracket, &mut diag);
    check_bracket(bracket.estimate, target)?;
    let mut tail_at_hi = None;
    for p in 1..=steps {
        let mid = (lo + hi) * T::lit(0.5);
        let probe = tail_prob(setup, mid, &probe_opts, &stream.child("probe", p as u64))?;
        record(&probe, &mut diag);
        if probe.estimate <= target {
            hi = mid;
            tail_at_hi = Some(probe.estimate);
        } else {
            lo = mid;
        }
    }
    let tail_at_hi = match tail_at_hi {
        Some(v) => v,
        None => {
            let probe = tail_prob(
                setup,
                hi,
                &probe_opts,
                &stream.child("probe", steps as u64 + 1),
            )?;
            record(&probe, &mut diag);
            probe.estimate
        }
    };
    diag.tolerance = Some(tol);
    note_capped_orders(&mut diag);
    Ok(RiskReport {
        measure: RiskMeasure::Var,
        alpha,
        value: hi,
        tail_prob_at_value: tail_at_hi,
        threshold: None,
        total_queries: ledger,
        diagnostics: diag,
    })
}

/// Below this estimated tail probability TVaR is reported as 0.
const DEGENERATE_TAIL: f64 = 1e-12;

/// TVaR_S(α) = 𝔼[S | S ≥ l_α] for a VaR level `l_alpha`.
///
/// 𝔼[S 1{S ≥ l}] comes from est_rm on the payoff (s − s_lo)/(s_hi − s_lo)
/// · 1{s ≥ l}, unmapped with a second est_rm run for Pr(S ≥ l); the value is
/// their ratio. Each run gets confidence δ/2 and the streams
/// `("tvar", 0)` and `("tvar", 1)`.
pub fn tvar<T: Scalar>(
    setup: &AggregationSetup<T>,
    alpha: T,
    l_alpha: T,
    opts: &EstRmOptions<T>,
    stream: &RngStream,
) -> Result<RiskReport<T>> {
    check_unit("alpha", alpha)?;
    let mut diag = base_diagnostics(setup, opts, stream)?;
    let (s_lo, s_hi) = setup.sum_range();
    let half = opts.with_accuracy(opts.epsilon, opts.delta * T::lit(0.5));
    let payoff = PayoffSpec::tvar_indicator(l_alpha, s_lo, s_hi)?;
    let scaled = est_rm(setup, &payoff, &half, &stream.child("tvar", 0))?;
    let tail = tail_prob(setup, l_alpha, &half, &stream.child("tvar", 1))?;
    let prob = tail.estimate;
    let expectation = (s_hi - s_lo) * scaled.estimate + s_lo * prob;

    diag.est_rm_calls = 2;
    diag.phi_clipped = scaled.phi_clipped + tail.phi_clipped;
    diag.marginals = scaled.marginals.clone();
    diag.tail_expectation = Some(expectation);
    diag.tail_expectation_over_one_minus_alpha = Some(expectation / (T::one() - alpha));
    note_capped_orders(&mut diag);
    let value = if prob.to_f64_lossy() < DEGENERATE_TAIL {
        let msg = format!("no tail mass at or above {l_alpha}; TVaR reported as 0");
        log::warn!("{msg}");
        diag.warnings.push(msg);
        T::zero()
    } else {
        expectation / prob
    };
    Ok(RiskReport {
        measure: RiskMeasure::Tvar,
        alpha,
        value,
        tail_prob_at_value: prob,
        threshold: Some(l_alpha),
        total_queries: scaled.ledger + tail.ledger,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::{discretize, product_expectation};
    use approx::assert_abs_diff_eq;

    fn setup(rho: f64, bits: u32, source_eps: f64) -> AggregationSetup<f64> {
        let spec = MarginalSpec::standard_normal();
        let grid = discretize(&spec, bits, -8.0, 8.0).unwrap();
        let copula = if rho == 0.0 {
            CopulaModel::independence(2).unwrap()
        } else {
            CopulaModel::gaussian_2d(rho).unwrap()
        };
        AggregationSetup::with_auto_windows(
            vec![
                (spec, grid.clone(), SmoothnessParams::default()),
                (spec, grid, SmoothnessParams::default()),
            ],
            copula,
            source_eps,
        )
        .unwrap()
    }

    fn analytic_exact(eps: f64) -> EstRmOptions<f64> {
        EstRmOptions {
            cdf_source: CdfSource::Analytic,
            ..EstRmOptions::new(eps, 0.05, QaeMode::Exact)
        }
    }

    #[test]
    fn trivial_payoffs() {
        let s = setup(0.5, 8, 0.01);
        let stream = RngStream::new(1);
        let opts = analytic_exact(0.01);
        let zero = est_rm(&s, &PayoffSpec::custom(|_| 0.0), &opts, &stream).unwrap();
        assert_eq!(zero.estimate, 0.0);
        let one = est_rm(&s, &PayoffSpec::custom(|_| 1.0), &opts, &stream).unwrap();
        assert!((one.estimate - 1.0).abs() < 0.01, "{}", one.estimate);
    }

    #[test]
    fn exact_mode_equals_brute_force() {
        let s = setup(0.5, 8, 0.01);
        let opts = analytic_exact(0.01);
        let payoff = PayoffSpec::VarIndicator { l: 1.0 };
        let got = est_rm(&s, &payoff, &opts, &RngStream::new(0))
            .unwrap()
            .estimate;
        let grids: Vec<_> = s.marginals().iter().map(|m| m.grid.clone()).collect();
        let cop = s.copula();
        let want = product_expectation(&grids, |x| {
            let g = if x[0] + x[1] >= 1.0 { 1.0 } else { 0.0 };
            let u = [
                MarginalSpec::<f64>::standard_normal().cdf(x[0]),
                MarginalSpec::<f64>::standard_normal().cdf(x[1]),
            ];
            g * cop.density(&u).unwrap()
        })
        .unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-9);
    }

    #[test]
    fn independence_phi_is_reciprocal_c_max() {
        let s = setup(0.0, 6, 0.1);
        let out = est_rm(
            &s,
            &PayoffSpec::custom(|_| 1.0),
            &analytic_exact(0.1),
            &RngStream::new(0),
        )
        .unwrap();
        assert_abs_diff_eq!(out.amplitude, 1.0 / 1.05, epsilon = 1e-12);
    }

    #[test]
    fn tail_prob_monotone_and_symmetric() {
        let s = setup(0.5, 8, 0.01);
        let opts = analytic_exact(0.01);
        let stream = RngStream::new(3);
        let mut prev = f64::INFINITY;
        for l in [-20.0, -2.0, 0.0, 1.0, 3.0, 20.0] {
            let p = tail_prob(&s, l, &opts, &stream).unwrap().estimate;
            assert!(p <= prev + 1e-12);
            prev = p;
        }
        assert_abs_diff_eq!(
            tail_prob(&s, 0.0, &opts, &stream).unwrap().estimate,
            0.5,
            epsilon = 0.01
        );
        assert_eq!(tail_prob(&s, 20.0, &opts, &stream).unwrap().estimate, 0.0);
        assert!(tail_prob(&s, -20.0, &opts, &stream).unwrap().estimate > 0.98);
    }

    #[test]
    fn unset_bounds_propagate() {
        let spec = MarginalSpec::standard_normal();
        let grid = discretize(&spec, 6, -8.0, 8.0).unwrap();
        let m = MarginalSetup {
            spec,
            grid,
            window: TruncationWindow::new(4.0).unwrap(),
            smoothness: SmoothnessParams::default(),
        };
        let s = AggregationSetup::new(vec![m.clone(), m], CopulaModel::gaussian_2d(0.5).unwrap())
            .unwrap();
        let err = est_rm(
            &s,
            &PayoffSpec::VarIndicator { l: 0.0 },
            &analytic_exact(0.1),
            &RngStream::new(0),
        );
        assert!(matches!(err, Err(Error::UnsetBounds)));
    }

    #[test]
    fn setup_validation() {
        let spec = MarginalSpec::standard_normal();
        let grid = discretize(&spec, 6, -3.0, 3.0).unwrap();
        let m = MarginalSetup {
            spec,
            grid,
            window: TruncationWindow::new(4.0).unwrap(),
            smoothness: SmoothnessParams::default(),
        };
        let cop = CopulaModel::independence(1).unwrap();
        assert!(matches!(
            AggregationSetup::new(vec![m.clone()], cop),
            Err(Error::WindowCoverage { .. })
        ));
        let cop = CopulaModel::independence(2).unwrap();
        assert!(matches!(
            AggregationSetup::new(vec![m], cop),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn analytic_var_tvar_and_median() {
        let s = setup(0.5, 10, 0.002);
        let opts = analytic_exact(0.002);
        let stream = RngStream::new(5);
        let v = var(&s, 0.99, &opts, &stream).unwrap();
        assert!((v.value - 4.029_352_713_918_58).abs() < 0.15, "{}", v.value);
        assert!(v.tail_prob_at_value <= 0.01 + 0.002);
        let t = tvar(&s, 0.99, v.value, &opts, &stream).unwrap();
        assert!(t.value >= v.value);
        assert!((t.value - 4.616_286_442_694_007).abs() < 0.2, "{}", t.value);
        let m = var(&s, 0.5, &opts, &stream).unwrap();
        assert!(m.value.abs() <= s.coarsest_spacing() + 1e-12, "{}", m.value);
    }

    #[test]
    fn tvar_degenerate_above_grid() {
        let s = setup(0.5, 8, 0.01);
        let t = tvar(&s, 0.99, 50.0, &analytic_exact(0.01), &RngStream::new(0)).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.diagnostics.warnings.len(), 1);
    }

    #[test]
    fn bracket_failure() {
        assert!(check_bracket(0.9, 0.95).is_err());
        assert!(matches!(
            check_bracket(0.01, 0.01),
            Err(Error::BracketFailure { .. })
        ));
        assert!(check_bracket(0.999, 0.01).is_ok());
    }
}
