//! Marginal CDF estimation as a truncated Hermite series whose coefficients
//! come from simulated amplitude estimation.
//!
//! With a_k = 𝔼[h_k(X)], the density is f ≈ Σ a_k h_k and the CDF on the
//! window [−L, L] is F̂(x) = Σ a_k 𝓗_{k,L}(x). Each a_k is recovered from the
//! amplitude 𝔼[h̄_k(X)] = ½ + (π^{1/4}/2) a_k of the clipped payoff h̄_k.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::DiscretizedMarginal;
use crate::qae::{qmci, QaeMode, QueryLedger};
use crate::rng::RngStream;
use crate::scalar::{pi_pow_neg_quarter, Scalar};
use crate::special::{
    bar_from_value, hermite_function_row, hermite_integral_row, TruncationWindow,
};

/// Default ceiling on the series order.
pub const DEFAULT_K_CAP: usize = 128;

/// Smoothness order r and constant γ of the Hermite-series tail bound
/// γ K^{−r/2 + 1/4}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SmoothnessParams<T: Scalar> {
    pub r: u32,
    pub gamma: T,
}

impl<T: Scalar> Default for SmoothnessParams<T> {
    fn default() -> Self {
        Self {
            r: 4,
            gamma: T::one(),
        }
    }
}

impl<T: Scalar> SmoothnessParams<T> {
    pub fn new(r: u32, gamma: T) -> Result<Self> {
        let sp = Self { r, gamma };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::InvalidParameter(
                "smoothness order r must be at least 1".into(),
            ));
        }
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "smoothness constant gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// γ K^{−r/2 + 1/4}.
    pub fn tail_bound(&self, k: usize) -> T {
        let exponent = -T::from_u32(self.r).expect("small integer") * T::lit(0.5) + T::lit(0.25);
        self.gamma * T::from_usize_lossy(k.max(1)).powf(exponent)
    }
}

/// Series order chosen by [`choose_k`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesOrder {
    pub k: usize,
    /// The uncapped order exceeded the cap.
    pub capped: bool,
}

/// K = ⌈(8Lγ/ε)^{4/(2r−1)}⌉, limited to `k_cap`.
pub fn choose_k<T: Scalar>(
    window: TruncationWindow<T>,
    sp: SmoothnessParams<T>,
    epsilon: T,
    k_cap: usize,
) -> Result<SeriesOrder> {
    sp.validate()?;
    if !(epsilon > T::zero()) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let base = (T::lit(8.0) * window.half_width() * sp.gamma / epsilon).to_f64_lossy();
    let exponent = 4.0 / (2.0 * f64::from(sp.r) - 1.0);
    let raw = base.powf(exponent);
    // shave float noise so exact integers do not round up
    let k = (raw * (1.0 - 1e-12)).ceil().max(1.0);
    if k > k_cap as f64 {
        log::debug!("series order {k} exceeds the cap; using K = {k_cap}");
        return Ok(SeriesOrder {
            k: k_cap,
            capped: true,
        });
    }
    Ok(SeriesOrder {
        k: k as usize,
        capped: false,
    })
}

/// Truncated Hermite-series CDF estimate on the window [−L, L].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EstimatedCdf<T: Scalar> {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: T,
    coefficients: Vec<T>,
}

impl<T: Scalar> EstimatedCdf<T> {
    pub fn new(window: TruncationWindow<T>, coefficients: Vec<T>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidParameter(
                "a series needs at least one coefficient".into(),
            ));
        }
        Ok(Self {
            k: coefficients.len() - 1,
            l: window.half_width(),
            coefficients,
        })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn window(&self) -> TruncationWindow<T> {
        TruncationWindow::new(self.l).expect("window validated at construction")
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    /// F̂(x): 0 below −L, 1 at or above L, the series in between.
    pub fn eval_cdf(&self, x: T) -> T {
        if x < -self.l {
            return T::zero();
        }
        if x >= self.l {
            return T::one();
        }
        let row = hermite_integral_row(self.k, self.window(), x).expect("x inside the window");
        row.iter()
            .zip(&self.coefficients)
            .map(|(&h, &a)| a * h)
            .sum()
    }

    /// F̂(x) clamped into [0, 1].
    pub fn eval_cdf_clamped(&self, x: T) -> T {
        self.eval_cdf(x).max(T::zero()).min(T::one())
    }

    /// f̂(x) = Σ â_k h_k(x); may dip slightly below zero.
    pub fn eval_pdf(&self, x: T) -> T {
        let row = hermite_function_row(self.k, x);
        row.iter()
            .zip(&self.coefficients)
            .map(|(&h, &a)| a * h)
            .sum()
    }
}

/// `n` equally spaced probe points on [−L − 1, L + 1].
pub fn probe_grid<T: Scalar>(window: TruncationWindow<T>, n: usize) -> Vec<T> {
    let lo = -window.half_width() - T::one();
    let hi = window.half_width() + T::one();
    let n = n.max(2);
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    (0..n).map(|i| lo + step * T::from_usize_lossy(i)).collect()
}

/// max_x |F̂(x) − F(x)| over `probes`.
pub fn sup_error<T: Scalar, F: Fn(T) -> T>(ec: &EstimatedCdf<T>, cdf: F, probes: &[T]) -> T {
    probes
        .iter()
        .map(|&x| (ec.eval_cdf(x) - cdf(x)).abs())
        .fold(T::zero(), T::max)
}

/// Exact amplitudes 𝔼[h̄_k(X)] for k = 0, …, K on the grid.
pub fn coefficient_amplitudes<T: Scalar>(dm: &DiscretizedMarginal<T>, k: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); k + 1];
    for (&x, &w) in dm.grid().iter().zip(dm.weights()) {
        if w == T::zero() {
            continue;
        }
        let row = hermite_function_row(k, x);
        for (a, h) in acc.iter_mut().zip(row) {
            *a += bar_from_value(h) * w;
        }
    }
    acc
}

/// Per-coefficient accuracy √π ε / (16 L (K + 1)).
pub fn coefficient_accuracy<T: Scalar>(window: TruncationWindow<T>, k: usize, epsilon: T) -> T {
    T::PI().sqrt() * epsilon / (T::lit(16.0) * window.half_width() * T::from_usize_lossy(k + 1))
}

/// Estimates the marginal CDF with K + 1 simulated QMCI runs, one per
/// coefficient, each at accuracy √π ε/(16L(K+1)) and confidence δ/(K+1).
/// Coefficient k uses the child stream `("coefficient", k)`.
pub fn est_marg<T: Scalar>(
    dm: &DiscretizedMarginal<T>,
    k: usize,
    window: TruncationWindow<T>,
    epsilon: T,
    delta: T,
    mode: QaeMode,
    stream: &RngStream,
) -> Result<(EstimatedCdf<T>, QueryLedger)> {
    dm.check_spans(window)?;
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let eps_k = coefficient_accuracy(window, k, epsilon);
    let delta_k = delta / T::from_usize_lossy(k + 1);
    let amplitudes = coefficient_amplitudes(dm, k);
    let scale = pi_pow_neg_quarter::<T>();
    let two = T::lit(2.0);
    let runs = amplitudes
        .par_iter()
        .enumerate()
        .map(|(idx, &a)| {
            let res = qmci(
                a,
                eps_k,
                delta_k,
                mode,
                &stream.child("coefficient", idx as u64),
            )?;
            Ok((scale * (two * res.estimate - T::one()), res.ledger))
        })
        .collect::<Result<Vec<_>>>()?;
    let ledger = runs.iter().map(|r| r.1).sum();
    let coefficients = runs.into_iter().map(|r| r.0).collect();
    Ok((EstimatedCdf::new(window, coefficients)?, ledger))
}
