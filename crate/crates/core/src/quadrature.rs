//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Used as the independent oracle for Hermite orthonormality and for the
//! closed-form Hermite integrals.

use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        k += s * T::lit(WGK[j]);
        if j % 2 == 1 {
            g += s * T::lit(WG[j / 2]);
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// ∫_a^b f to absolute tolerance `tol` (best effort past `max_depth` bisections).
pub fn integrate<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> T {
    integrate_with_depth(&f, a, b, tol, 0, 40)
}

fn integrate_with_depth<T: Scalar, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    tol: T,
    depth: usize,
    max_depth: usize,
) -> T {
    let (v, err) = kronrod(f, a, b);
    if err <= tol || depth >= max_depth {
        return v;
    }
    let m = (a + b) * T::lit(0.5);
    let t = tol * T::lit(0.5);
    integrate_with_depth(f, a, m, t, depth + 1, max_depth)
        + integrate_with_depth(f, m, b, t, depth + 1, max_depth)
}

/// Integrates over consecutive breakpoints `points[0] < points[1] < ...`.
pub fn integrate_piecewise<T: Scalar, F: Fn(T) -> T>(f: F, points: &[T], tol: T) -> T {
    let pieces = T::from_usize_lossy(points.len().saturating_sub(1).max(1));
    points
        .windows(2)
        .map(|w| integrate_with_depth(&f, w[0], w[1], tol / pieces, 0, 40))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_and_gaussian() {
        assert_abs_diff_eq!(
            integrate(|x: f64| x * x, 0.0, 3.0, 1e-13),
            9.0,
            epsilon = 1e-12
        );
        let g = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-14);
        assert_abs_diff_eq!(g, std::f64::consts::PI.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn piecewise_sums_segments() {
        let v = integrate_piecewise(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], 1e-13);
        assert_abs_diff_eq!(v, 2.5, epsilon = 1e-12);
    }
}
