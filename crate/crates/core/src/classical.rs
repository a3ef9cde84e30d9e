//! Sample-sort-rearrange Monte Carlo baseline and its VaR/TVaR estimators.

use rand::Rng;
use rayon::prelude::*;

use crate::copula::CopulaModel;
use crate::error::{Error, Result};
use crate::marginals::MarginalSpec;
use crate::rng::RngStream;
use crate::scalar::Scalar;

const SAMPLE_BLOCK: usize = 8192;

/// Uniform draw from the open interval (0, 1) on the 2⁻⁵³ lattice.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn sort_ascending<T: Scalar>(v: &mut [T]) {
    v.par_sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
}

/// `n` inverse-transform draws from `spec`, sorted ascending. Blocks of
/// draws use the child streams `("block", b)`.
pub fn sample_marginal<T: Scalar>(
    spec: &MarginalSpec<T>,
    n: usize,
    stream: &RngStream,
) -> Result<Vec<T>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be positive".into(),
        ));
    }
    let mut out = (0..n.div_ceil(SAMPLE_BLOCK))
        .into_par_iter()
        .map(|b| {
            let len = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
            let mut rng = stream.child("block", b as u64).rng();
            (0..len)
                .map(|_| spec.quantile(T::lit(open_unit(&mut rng))))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    sort_ascending(&mut out);
    Ok(out)
}

/// Empirical percentile function: the k-th smallest sample for
/// u ∈ ((k−1)/N, k/N], and the smallest for u = 0.
pub fn percentile_function<T: Scalar>(sorted: &[T], u: T) -> Result<T> {
    if sorted.is_empty() {
        return Err(Error::InvalidParameter(
            "percentile of an empty sample".into(),
        ));
    }
    if !(u >= T::zero() && u <= T::one()) {
        return Err(Error::Domain(format!(
            "percentile level must lie in [0,1], got {u}"
        )));
    }
    let n = sorted.len();
    let x = u.to_f64_lossy() * n as f64;
    // u = k/N computed in floating point may land a hair above k
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x.ceil()
    };
    let k = (k as usize).clamp(1, n);
    Ok(sorted[k - 1])
}

/// How Algorithm-1 maps copula uniforms back to marginal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantileSource {
    /// Percentile function of the sorted marginal samples.
    #[default]
    Empirical,
    /// Analytic quantile F_i⁻¹ (exact copula sampling).
    Analytic,
}

/// Sorted marginal samples and the rearranged joint sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T: Scalar> {
    columns: Vec<Vec<T>>,
    /// Row-major N × d.
    joint: Vec<T>,
}

impl<T: Scalar> SampleMatrix<T> {
    pub fn len(&self) -> usize {
        self.joint.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Sorted samples of marginal `i`.
    pub fn column(&self, i: usize) -> &[T] {
        &self.columns[i]
    }

    pub fn row(&self, l: usize) -> &[T] {
        let d = self.dim();
        &self.joint[l * d..(l + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.joint.chunks_exact(self.dim())
    }

    /// s^{(l)} = Σ_i x̃_i^{(l)} for every row.
    pub fn row_sums(&self) -> Vec<T> {
        self.joint
            .par_chunks_exact(self.dim())
            .map(|r| r.iter().copied().sum())
            .collect()
    }

    /// Row sums sorted ascending.
    pub fn sorted_row_sums(&self) -> Vec<T> {
        let mut s = self.row_sums();
        sort_ascending(&mut s);
        s
    }
}

/// Joint samples from the copula model: sample and sort each marginal, draw
/// N copula vectors and map every coordinate through the percentile
/// function (or the analytic quantile). Streams: marginal i uses
/// `("marginal", i)`, the copula draws `("copula", 0)`.
pub fn alg1_joint_samples<T: Scalar>(
    specs: &[MarginalSpec<T>],
    copula: &CopulaModel<T>,
    n: usize,
    source: QuantileSource,
    stream: &RngStream,
) -> Result<SampleMatrix<T>> {
    let d = specs.len();
    if copula.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: copula.dim(),
        });
    }
    let columns = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| sample_marginal(spec, n, &stream.child("marginal", i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let uniforms = copula.sample(n, &stream.child("copula", 0));
    let joint = uniforms
        .par_iter()
        .map(|u| {
            u.iter()
                .enumerate()
                .map(|(i, &ui)| match source {
                    QuantileSource::Empirical => percentile_function(&columns[i], ui),
                    QuantileSource::Analytic => {
                        // keep the quantile finite at the (measure-zero) endpoints
                        let eps = T::lit(f64::EPSILON);
                        specs[i].quantile(ui.max(eps).min(T::one() - eps))
                    }
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    Ok(SampleMatrix { columns, joint })
}

fn check_alpha<T: Scalar>(sm: &SampleMatrix<T>, alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if sm.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "at least 10 joint samples are needed, got {}",
            sm.len()
        )));
    }
    Ok(())
}

/// F̃_S⁻¹(α) over the row sums.
pub fn classical_var<T: Scalar>(sm: &SampleMatrix<T>, alpha: T) -> Result<T> {
    check_alpha(sm, alpha)?;
    percentile_function(&sm.sorted_row_sums(), alpha)
}

/// Σ s 1{s ≥ VaR} / Σ 1{s ≥ VaR}.
pub fn classical_tvar<T: Scalar>(sm: &SampleMatrix<T>, alpha: T) -> Result<T> {
    check_alpha(sm, alpha)?;
    let sums = sm.sorted_row_sums();
    let v = percentile_function(&sums, alpha)?;
    let start = sums.partition_point(|&s| s < v);
    let tail = &sums[start..];
    if tail.is_empty() {
        return Err(Error::DegenerateTail(v.to_f64_lossy()));
    }
    Ok(tail.iter().copied().sum::<T>() / T::from_usize_lossy(tail.len()))
}
