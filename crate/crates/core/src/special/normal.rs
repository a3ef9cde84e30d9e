use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_CF_ITER: usize = 500;

/// erf(z) = 2/√π e^{-z²} Σ 2ⁿ z^{2n+1} / (1·3···(2n+1)); all terms positive.
fn erf_series<T: Scalar>(z: T) -> T {
    let two_z2 = T::lit(2.0) * z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0usize;
    loop {
        n += 1;
        term = term * two_z2 / T::from_usize_lossy(2 * n + 1);
        sum += term;
        if term <= sum * T::epsilon() || n > 400 {
            break;
        }
    }
    T::lit(2.0) / T::PI().sqrt() * (-z * z).exp() * sum
}

/// Lentz evaluation of erfc(z) = e^{-z²}/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))).
fn erfc_continued_fraction<T: Scalar>(z: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let mut f = z;
    let mut c = f;
    let mut d = T::zero();
    for n in 1..=MAX_CF_ITER {
        let a = T::from_usize_lossy(n) * T::lit(0.5);
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f *= delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    (-z * z).exp() / (T::PI().sqrt() * f)
}

// Switch point between the series and the continued fraction.
const SERIES_LIMIT: f64 = 2.5;

pub fn erf<T: Scalar>(z: T) -> T {
    let a = z.abs();
    let v = if a < T::lit(SERIES_LIMIT) {
        erf_series(a)
    } else {
        T::one() - erfc_continued_fraction(a)
    };
    if z < T::zero() {
        -v
    } else {
        v
    }
}

/// Complementary error function, relatively accurate in the right tail.
pub fn erfc<T: Scalar>(z: T) -> T {
    if z < T::zero() {
        return T::lit(2.0) - erfc(-z);
    }
    if z < T::lit(SERIES_LIMIT) {
        T::one() - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    }
}

pub fn std_normal_pdf<T: Scalar>(x: T) -> T {
    (-x * x * T::lit(0.5)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Φ_SN(x). The lower tail is computed directly, never as `1 - upper`.
pub fn std_normal_cdf<T: Scalar>(x: T) -> T {
    let z = x.abs() / T::SQRT_2();
    if x < T::zero() {
        T::lit(0.5) * erfc(z)
    } else {
        T::one() - T::lit(0.5) * erfc(z)
    }
}

// Acklam's rational approximation, relative error ~1.2e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam_lower(q: f64) -> f64 {
    // q in (0, 0.5]
    const P_LOW: f64 = 0.024_25;
    if q < P_LOW {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        let s = q - 0.5;
        let r = s * s;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * s
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Φ_SN^{-1}(p) for p in (0, 1).
pub fn std_normal_quantile<T: Scalar>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Domain(format!(
            "normal quantile needs p in (0,1), got {p}"
        )));
    }
    // 1 - p is exact for p >= 1/2, so work in the lower tail and reflect.
    let upper = p > T::lit(0.5);
    let q = if upper { T::one() - p } else { p };
    let mut x = T::lit(acklam_lower(q.to_f64_lossy()));
    for _ in 0..2 {
        let e = std_normal_cdf(x) - q;
        let u = e * (T::lit(2.0) * T::PI()).sqrt() * (x * x * T::lit(0.5)).exp();
        let step = u / (T::one() + x * u * T::lit(0.5));
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    Ok(if upper { -x } else { x })
}
