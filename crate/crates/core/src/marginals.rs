//! Marginal risk-variable models and their grid discretization.
//!
//! A [`DiscretizedMarginal`] is the classical stand-in for a state-preparation
//! oracle: the squared amplitudes √f(x_j)/𝒩 of the loaded state become the
//! normalized weights f(x_j)/Σf. Grid expectations computed here are the
//! exact amplitudes that the simulated amplitude estimation then perturbs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{std_normal_cdf, std_normal_pdf, std_normal_quantile, TruncationWindow};

/// Largest product grid [`product_expectation`] will sum over.
pub const MAX_PRODUCT_CELLS: u128 = 1 << 24;

/// Analytic marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "family",
    content = "params",
    rename_all = "snake_case",
    bound = ""
)]
pub enum MarginalSpec<T: Scalar> {
    Normal {
        mu: T,
        sigma: T,
    },
    /// `shift + exp(N(mu, sigma²))`.
    Lognormal {
        mu: T,
        sigma: T,
        #[serde(default)]
        shift: T,
    },
    /// `w N(mu1, sigma1²) + (1 - w) N(mu2, sigma2²)`.
    Mixture {
        w: T,
        mu1: T,
        sigma1: T,
        mu2: T,
        sigma2: T,
    },
}

fn positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn finite<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

impl<T: Scalar> MarginalSpec<T> {
    pub fn normal(mu: T, sigma: T) -> Result<Self> {
        let s = Self::Normal { mu, sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn standard_normal() -> Self {
        Self::Normal {
            mu: T::zero(),
            sigma: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Normal { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            Self::Lognormal { mu, sigma, shift } => {
                finite("mu", mu)?;
                finite("shift", shift)?;
                positive("sigma", sigma)
            }
            Self::Mixture {
                w,
                mu1,
                sigma1,
                mu2,
                sigma2,
            } => {
                if !(w >= T::zero() && w <= T::one()) {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weight must lie in [0,1], got {w}"
                    )));
                }
                finite("mu1", mu1)?;
                finite("mu2", mu2)?;
                positive("sigma1", sigma1)?;
                positive("sigma2", sigma2)
            }
        }
    }

    pub fn pdf(&self, x: T) -> T {
        match *self {
            Self::Normal { mu, sigma } => std_normal_pdf((x - mu) / sigma) / sigma,
            Self::Lognormal { mu, sigma, shift } => {
                let y = x - shift;
                if y <= T::zero() {
                    T::zero()
                } else {
                    std_normal_pdf((y.ln() - mu) / sigma) / (sigma * y)
                }
            }
            Self::Mixture {
                w,
                mu1,
                sigma1,
                mu2,
                sigma2,
            } => {
                w * std_normal_pdf((x - mu1) / sigma1) / sigma1
                    + (T::one() - w) * std_normal_pdf((x - mu2) / sigma2) / sigma2
            }
        }
    }

    pub fn cdf(&self, x: T) -> T {
        match *self {
            Self::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Self::Lognormal { mu, sigma, shift } => {
                let y = x - shift;
                if y <= T::zero() {
                    T::zero()
                } else {
                    std_normal_cdf((y.ln() - mu) / sigma)
                }
            }
            Self::Mixture {
                w,
                mu1,
                sigma1,
                mu2,
                sigma2,
            } => {
                w * std_normal_cdf((x - mu1) / sigma1)
                    + (T::one() - w) * std_normal_cdf((x - mu2) / sigma2)
            }
        }
    }

    /// F^{-1}(p) for p in (0, 1).
    pub fn quantile(&self, p: T) -> Result<T> {
        match *self {
            Self::Normal { mu, sigma } => Ok(mu + sigma * std_normal_quantile(p)?),
            Self::Lognormal { mu, sigma, shift } => {
                Ok(shift + (mu + sigma * std_normal_quantile(p)?).exp())
            }
            Self::Mixture {
                mu1,
                sigma1,
                mu2,
                sigma2,
                ..
            } => {
                // bracket from the component quantiles, then bisect
                let z = std_normal_quantile(p)?;
                let a = (mu1 + sigma1 * z).min(mu2 + sigma2 * z);
                let b = (mu1 + sigma1 * z).max(mu2 + sigma2 * z);
                let (mut lo, mut hi) = (a, b);
                if lo == hi {
                    return Ok(lo);
                }
                for _ in 0..200 {
                    let mid = (lo + hi) * T::lit(0.5);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok((lo + hi) * T::lit(0.5))
            }
        }
    }

    pub fn mean(&self) -> T {
        match *self {
            Self::Normal { mu, .. } => mu,
            Self::Lognormal { mu, sigma, shift } => {
                shift + (mu + sigma * sigma * T::lit(0.5)).exp()
            }
            Self::Mixture { w, mu1, mu2, .. } => w * mu1 + (T::one() - w) * mu2,
        }
    }

    /// Default discretization range: eight standard deviations either side
    /// (per component for mixtures, in log space for lognormals).
    pub fn default_range(&self) -> (T, T) {
        let eight = T::lit(8.0);
        match *self {
            Self::Normal { mu, sigma } => (mu - eight * sigma, mu + eight * sigma),
            Self::Lognormal { mu, sigma, shift } => (shift, shift + (mu + eight * sigma).exp()),
            Self::Mixture {
                mu1,
                sigma1,
                mu2,
                sigma2,
                ..
            } => (
                (mu1 - eight * sigma1).min(mu2 - eight * sigma2),
                (mu1 + eight * sigma1).max(mu2 + eight * sigma2),
            ),
        }
    }
}

/// Uniform grid with normalized probability weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiscretizedMarginal<T: Scalar> {
    grid: Vec<T>,
    weights: Vec<T>,
    norm_const: T,
}

impl<T: Scalar> DiscretizedMarginal<T> {
    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// 𝒩² = Σ_j f(x_j) before normalization.
    pub fn norm_const(&self) -> T {
        self.norm_const
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn lo(&self) -> T {
        self.grid[0]
    }

    pub fn hi(&self) -> T {
        self.grid[self.grid.len() - 1]
    }

    pub fn spacing(&self) -> T {
        (self.hi() - self.lo()) / T::from_usize_lossy(self.grid.len() - 1)
    }

    pub fn spans(&self, window: TruncationWindow<T>) -> bool {
        self.lo() <= -window.half_width() && self.hi() >= window.half_width()
    }

    pub fn check_spans(&self, window: TruncationWindow<T>) -> Result<()> {
        if self.spans(window) {
            Ok(())
        } else {
            Err(Error::WindowCoverage {
                grid_lo: self.lo().to_f64_lossy(),
                grid_hi: self.hi().to_f64_lossy(),
                l: window.half_width().to_f64_lossy(),
            })
        }
    }
}

/// Discretizes `spec` onto 2^`n_bits` uniform points spanning [lo, hi].
pub fn discretize<T: Scalar>(
    spec: &MarginalSpec<T>,
    n_bits: u32,
    lo: T,
    hi: T,
) -> Result<DiscretizedMarginal<T>> {
    spec.validate()?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidRange {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    if !(2..=20).contains(&n_bits) {
        return Err(Error::InvalidParameter(format!(
            "grid bits must lie in [2, 20], got {n_bits}"
        )));
    }
    let n = 1usize << n_bits;
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    let grid: Vec<T> = (0..n)
        .map(|j| {
            if j == n - 1 {
                hi
            } else {
                lo + step * T::from_usize_lossy(j)
            }
        })
        .collect();
    let dens: Vec<T> = grid.iter().map(|&x| spec.pdf(x)).collect();
    let norm_const: T = dens.iter().copied().sum();
    if !(norm_const > T::zero()) || !norm_const.is_finite() {
        return Err(Error::InvalidParameter(
            "grid carries no probability mass".into(),
        ));
    }
    let weights = dens.into_iter().map(|f| f / norm_const).collect();
    Ok(DiscretizedMarginal {
        grid,
        weights,
        norm_const,
    })
}

/// Discretizes over [`MarginalSpec::default_range`].
pub fn discretize_default<T: Scalar>(
    spec: &MarginalSpec<T>,
    n_bits: u32,
) -> Result<DiscretizedMarginal<T>> {
    let (lo, hi) = spec.default_range();
    discretize(spec, n_bits, lo, hi)
}

/// Smallest L on the 0.5-step lattice with F(−L) ≤ ε/2 and F(L) ≥ 1 − ε.
pub fn select_truncation<T: Scalar>(spec: &MarginalSpec<T>, eps: T) -> Result<TruncationWindow<T>> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0,1), got {eps}"
        )));
    }
    spec.validate()?;
    let half = T::lit(0.5);
    let ok = |n: u64| {
        let l = T::from_u64(n).expect("lattice index") * half;
        spec.cdf(-l) <= eps * half && spec.cdf(l) >= T::one() - eps
    };
    // both conditions are monotone in L: gallop, then bisect the lattice index
    let mut hi = 1u64;
    while !ok(hi) {
        hi = hi.checked_mul(2).ok_or_else(|| {
            Error::InvalidParameter("no finite truncation window satisfies the tail bound".into())
        })?;
        if hi > 1 << 40 {
            return Err(Error::InvalidParameter(
                "no finite truncation window satisfies the tail bound".into(),
            ));
        }
    }
    let mut lo = hi / 2; // ok(lo) is false unless lo == 0
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    TruncationWindow::new(T::from_u64(hi).expect("lattice index") * half)
}

/// Σ_j φ(x_j) w_j, the amplitude of the payoff-encoded state.
pub fn grid_expectation<T: Scalar, F: Fn(T) -> T>(dm: &DiscretizedMarginal<T>, phi: F) -> T {
    dm.grid
        .iter()
        .zip(&dm.weights)
        .map(|(&x, &w)| phi(x) * w)
        .sum()
}

fn product_size<T: Scalar>(axes: &[&[T]]) -> Result<u128> {
    let cells = axes
        .iter()
        .try_fold(1u128, |acc, w| acc.checked_mul(w.len() as u128))
        .unwrap_or(u128::MAX);
    if cells > MAX_PRODUCT_CELLS {
        return Err(Error::SizeGuard {
            cells,
            cap: MAX_PRODUCT_CELLS,
        });
    }
    Ok(cells)
}

/// Σ over the product grid of φ(j₁, …, j_d) ∏ w_i[j_i], with φ addressed
/// by grid indices.
///
/// The outermost axis is processed in parallel; the per-slice partial sums
/// are combined in index order so the result does not depend on the number
/// of worker threads.
pub fn product_expectation_indexed<T, F>(weights: &[&[T]], phi: F) -> Result<T>
where
    T: Scalar,
    F: Fn(&[usize]) -> T + Sync,
{
    if weights.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    product_size(weights)?;
    let d = weights.len();
    let partials: Vec<T> = (0..weights[0].len())
        .into_par_iter()
        .map(|j0| {
            let mut idx = vec![0usize; d];
            idx[0] = j0;
            let w0 = weights[0][j0];
            let mut acc = T::zero();
            loop {
                let mut w = w0;
                for i in 1..d {
                    w *= weights[i][idx[i]];
                }
                acc += phi(&idx) * w;
                // odometer over axes 1..d
                let mut axis = d;
                loop {
                    axis -= 1;
                    if axis == 0 {
                        return acc;
                    }
                    idx[axis] += 1;
                    if idx[axis] < weights[axis].len() {
                        break;
                    }
                    idx[axis] = 0;
                }
            }
        })
        .collect();
    Ok(partials.into_iter().sum())
}

/// 𝔼^ind[φ] over the product of the marginal grids.
pub fn product_expectation<T, F>(dms: &[DiscretizedMarginal<T>], phi: F) -> Result<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    let weights: Vec<&[T]> = dms.iter().map(|dm| dm.weights()).collect();
    product_expectation_indexed(&weights, |idx: &[usize]| {
        let x: Vec<T> = idx.iter().zip(dms).map(|(&j, dm)| dm.grid[j]).collect();
        phi(&x)
    })
}
