//! Gaussian and Student-t copulas: densities on the clipped cube, density
//! bounds, and sampling.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::special::{
    ln_gamma, std_normal_cdf, std_normal_quantile, student_t_cdf, student_t_quantile,
};

/// Default margin keeping copula arguments inside [clip, 1 − clip].
pub const DEFAULT_CLIP: f64 = 1e-3;

/// Default lattice points per axis for [`CopulaModel::compute_bounds`] (d = 2).
pub const DEFAULT_BOUNDS_RESOLUTION: usize = 129;

/// Floor applied to c'_max so downstream accuracy splits stay finite.
pub const C_PRIME_FLOOR: f64 = 1e-9;

const SAFETY: f64 = 1.05;
const SAMPLE_BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum CopulaFamily<T: Scalar> {
    Independence,
    Gaussian,
    StudentT { dof: T },
}

/// Upper bounds on the density and its first partials over the clipped cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DensityBounds<T: Scalar> {
    pub c_max: T,
    pub c_prime_max: T,
}

#[derive(Debug, Clone)]
pub struct CopulaModel<T: Scalar> {
    family: CopulaFamily<T>,
    dim: usize,
    corr: Vec<T>,
    chol: Vec<T>,
    inv: Vec<T>,
    log_det: T,
    // Student-t normalizers: joint and univariate log-constants
    t_joint: T,
    t_uni: T,
    clip: T,
    bounds: Option<DensityBounds<T>>,
}

impl<T: Scalar> CopulaModel<T> {
    pub fn independence(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "copula dimension must be positive".into(),
            ));
        }
        let mut eye = vec![T::zero(); dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = T::one();
        }
        Self::build(CopulaFamily::Independence, dim, eye)
    }

    /// Gaussian copula with correlation matrix `corr` (rows).
    pub fn gaussian(corr: &[Vec<T>]) -> Result<Self> {
        let (dim, flat) = flatten_correlation(corr)?;
        Self::build(CopulaFamily::Gaussian, dim, flat)
    }

    /// Student-t copula with `dof` degrees of freedom and shape matrix `corr`.
    pub fn student_t(dof: T, corr: &[Vec<T>]) -> Result<Self> {
        if !(dof > T::zero()) || !dof.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom must be positive, got {dof}"
            )));
        }
        let (dim, flat) = flatten_correlation(corr)?;
        Self::build(CopulaFamily::StudentT { dof }, dim, flat)
    }

    /// Two-dimensional Gaussian copula with correlation `rho`.
    pub fn gaussian_2d(rho: T) -> Result<Self> {
        Self::gaussian(&[vec![T::one(), rho], vec![rho, T::one()]])
    }

    fn build(family: CopulaFamily<T>, dim: usize, corr: Vec<T>) -> Result<Self> {
        let linalg::Factorization { chol, inv, log_det } = linalg::factor(&corr, dim)?;
        let (t_joint, t_uni) = match family {
            CopulaFamily::StudentT { dof } => {
                let half = T::lit(0.5);
                let d = T::from_usize_lossy(dim);
                let ln_nu_pi = (dof * T::PI()).ln();
                (
                    ln_gamma((dof + d) * half) - ln_gamma(dof * half) - d * half * ln_nu_pi,
                    ln_gamma((dof + T::one()) * half) - ln_gamma(dof * half) - half * ln_nu_pi,
                )
            }
            _ => (T::zero(), T::zero()),
        };
        Ok(Self {
            family,
            dim,
            corr,
            chol,
            inv,
            log_det,
            t_joint,
            t_uni,
            clip: T::lit(DEFAULT_CLIP),
            bounds: None,
        })
    }

    /// Replaces the clipping margin; previously computed bounds are dropped.
    pub fn with_clip(mut self, clip: T) -> Result<Self> {
        if !(clip > T::zero() && clip < T::lit(0.5)) {
            return Err(Error::InvalidParameter(format!(
                "clip must lie in (0, 0.5), got {clip}"
            )));
        }
        self.clip = clip;
        self.bounds = None;
        Ok(self)
    }

    pub fn family(&self) -> CopulaFamily<T> {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clip(&self) -> T {
        self.clip
    }

    /// Correlation (or shape) matrix, row-major.
    pub fn correlation(&self) -> &[T] {
        &self.corr
    }

    pub fn bounds(&self) -> Option<DensityBounds<T>> {
        self.bounds
    }

    pub fn c_max(&self) -> Result<T> {
        self.bounds.map(|b| b.c_max).ok_or(Error::UnsetBounds)
    }

    pub fn c_prime_max(&self) -> Result<T> {
        self.bounds.map(|b| b.c_prime_max).ok_or(Error::UnsetBounds)
    }

    pub fn set_bounds(&mut self, bounds: DensityBounds<T>) {
        self.bounds = Some(bounds);
    }

    #[inline]
    pub fn clamp(&self, u: T) -> T {
        u.max(self.clip).min(T::one() - self.clip)
    }

    /// Latent coordinate of a (clamped) uniform: Φ⁻¹ or t_ν⁻¹. Identity for
    /// the independence copula, whose density ignores it.
    pub fn latent(&self, u: T) -> T {
        let u = self.clamp(u);
        let z = match self.family {
            CopulaFamily::Independence => Ok(u),
            CopulaFamily::Gaussian => std_normal_quantile(u),
            CopulaFamily::StudentT { dof } => student_t_quantile(dof, u),
        };
        z.expect("clamped argument lies strictly inside (0, 1)")
    }

    /// Density as a function of latent coordinates (see [`Self::latent`]).
    pub fn density_latent(&self, z: &[T]) -> T {
        let half = T::lit(0.5);
        match self.family {
            CopulaFamily::Independence => T::one(),
            CopulaFamily::Gaussian => {
                let q = linalg::quad_form(&self.inv, self.dim, z);
                let norm2: T = z.iter().map(|&v| v * v).sum();
                (-half * self.log_det - half * (q - norm2)).exp()
            }
            CopulaFamily::StudentT { dof } => {
                let d = T::from_usize_lossy(self.dim);
                let q = linalg::quad_form(&self.inv, self.dim, z);
                let joint =
                    self.t_joint - half * self.log_det - (dof + d) * half * (q / dof).ln_1p();
                let marg: T = z
                    .iter()
                    .map(|&x| self.t_uni - (dof + T::one()) * half * (x * x / dof).ln_1p())
                    .sum();
                (joint - marg).exp()
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            })
        }
    }

    /// c(u) with every coordinate clamped into [clip, 1 − clip].
    pub fn density(&self, u: &[T]) -> Result<T> {
        self.check_dim(u.len())?;
        let z: Vec<T> = u.iter().map(|&v| self.latent(v)).collect();
        Ok(self.density_latent(&z))
    }

    /// c(F_1(x_1), …, F_d(x_d)) · ∏ f_i(x_i).
    pub fn joint_pdf_weight(&self, cdf_values: &[T], marginal_pdf_product: T) -> Result<T> {
        if marginal_pdf_product == T::zero() {
            self.check_dim(cdf_values.len())?;
            return Ok(T::zero());
        }
        Ok(self.density(cdf_values)? * marginal_pdf_product)
    }

    /// Searches a lattice on the clipped cube for the density maximum and the
    /// largest finite-difference partial derivative, inflates both by 5% and
    /// stores them. `resolution` is the per-axis lattice size for d ≤ 2; for
    /// d ≥ 3 the per-axis size shrinks so the total stays near resolution².
    pub fn compute_bounds(&mut self, resolution: usize) -> DensityBounds<T> {
        let d = self.dim;
        let resolution = resolution.max(2);
        let per_axis = if d <= 2 {
            resolution
        } else {
            let n = ((resolution * resolution) as f64)
                .powf(1.0 / d as f64)
                .floor() as usize;
            let n = n.max(5);
            log::warn!("copula bounds for d = {d} use a coarse {n}-point lattice per axis");
            n
        };

        let lo = self.clip;
        let hi = T::one() - self.clip;
        let step = (hi - lo) / T::from_usize_lossy(per_axis - 1);
        let h = T::epsilon().cbrt().min(step * T::lit(0.5));
        // per lattice value: (latent, latent below, latent above, du)
        let axis: Vec<(T, T, T, T)> = (0..per_axis)
            .map(|j| {
                let u = if j == per_axis - 1 {
                    hi
                } else {
                    lo + step * T::from_usize_lossy(j)
                };
                let dn = (u - h).max(lo);
                let up = (u + h).min(hi);
                (self.latent(u), self.latent(dn), self.latent(up), up - dn)
            })
            .collect();

        let total = per_axis.pow(d as u32);
        let (c_max, c_prime) = (0..total)
            .into_par_iter()
            .map(|cell| {
                let mut idx = cell;
                let mut z = vec![T::zero(); d];
                let mut picks = vec![0usize; d];
                for i in 0..d {
                    picks[i] = idx % per_axis;
                    idx /= per_axis;
                    z[i] = axis[picks[i]].0;
                }
                let c = self.density_latent(&z);
                let mut grad = T::zero();
                for i in 0..d {
                    let (zc, zdn, zup, du) = axis[picks[i]];
                    z[i] = zup;
                    let cu = self.density_latent(&z);
                    z[i] = zdn;
                    let cd = self.density_latent(&z);
                    z[i] = zc;
                    grad = grad.max(((cu - cd) / du).abs());
                }
                (c, grad)
            })
            .reduce(
                || (T::zero(), T::zero()),
                |a, b| (a.0.max(b.0), a.1.max(b.1)),
            );

        let safety = T::lit(SAFETY);
        let bounds = DensityBounds {
            c_max: c_max * safety,
            c_prime_max: (c_prime * safety).max(T::lit(C_PRIME_FLOOR)),
        };
        self.bounds = Some(bounds);
        bounds
    }

    /// Draws `count` vectors from the copula. Blocks of draws use child
    /// streams of `stream`, so output is independent of the thread count.
    pub fn sample(&self, count: usize, stream: &RngStream) -> Vec<Vec<T>> {
        let blocks = count.div_ceil(SAMPLE_BLOCK);
        (0..blocks)
            .into_par_iter()
            .flat_map_iter(|b| {
                let n = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
                let mut rng = stream.child("copula-block", b as u64).rng();
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    out.push(self.draw_one(&mut rng));
                }
                out
            })
            .collect()
    }

    fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let d = self.dim;
        if let CopulaFamily::Independence = self.family {
            return (0..d).map(|_| T::lit(rng.random::<f64>())).collect();
        }
        let n: Vec<T> = (0..d).map(|_| T::lit(StandardNormal.sample(rng))).collect();
        let mut z = vec![T::zero(); d];
        linalg::lower_mul(&self.chol, d, &n, &mut z);
        match self.family {
            CopulaFamily::StudentT { dof } => {
                let chi = ChiSquared::new(dof.to_f64_lossy()).expect("positive dof");
                let s = T::lit(chi.sample(rng));
                let scale = (dof / s).sqrt();
                z.iter()
                    .map(|&v| student_t_cdf(dof, v * scale).expect("positive dof"))
                    .collect()
            }
            _ => z.into_iter().map(std_normal_cdf).collect(),
        }
    }
}

fn flatten_correlation<T: Scalar>(corr: &[Vec<T>]) -> Result<(usize, Vec<T>)> {
    let d = corr.len();
    if d == 0 {
        return Err(Error::InvalidParameter(
            "correlation matrix is empty".into(),
        ));
    }
    let tol = T::lit(1e-12);
    let mut flat = Vec::with_capacity(d * d);
    for row in corr {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    for i in 0..d {
        if (flat[i * d + i] - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "correlation diagonal entry {i} is {}, expected 1",
                flat[i * d + i]
            )));
        }
        for j in 0..i {
            let (a, b) = (flat[i * d + j], flat[j * d + i]);
            if !a.is_finite() || (a - b).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "correlation matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok((d, flat))
}
