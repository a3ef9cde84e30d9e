//! Orthonormal Hermite functions
//!
//! h_k(x) = H_k(x) e^{-x²/2} / √(2^k k! √π), evaluated by the orthonormal
//! three-term recurrence
//!
//! ```text
//! h_{k+1}(x) = √(2/(k+1)) x h_k(x) − √(k/(k+1)) h_{k−1}(x)
//! ```
//!
//! which stays well scaled for large k, unlike the monomial recurrence for
//! H_k followed by normalization. The monomial forms are kept only as
//! low-order cross-checks.

use serde::{Deserialize, Serialize};

use super::normal::std_normal_cdf;
use crate::error::{Error, Result};
use crate::scalar::{pi_pow_neg_quarter, Scalar};

/// Half-width L of the interval [−L, L] on which a Hermite series is trusted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TruncationWindow<T: Scalar> {
    half_width: T,
}

impl<T: Scalar> TruncationWindow<T> {
    pub fn new(half_width: T) -> Result<Self> {
        if half_width > T::zero() && half_width.is_finite() {
            Ok(Self { half_width })
        } else {
            Err(Error::InvalidParameter(format!(
                "truncation half-width must be positive, got {half_width}"
            )))
        }
    }

    #[inline]
    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn contains(&self, x: T) -> bool {
        x >= -self.half_width && x <= self.half_width
    }
}

/// h_k(x).
pub fn hermite_function<T: Scalar>(k: usize, x: T) -> T {
    let h0 = pi_pow_neg_quarter::<T>() * (-x * x * T::lit(0.5)).exp();
    if k == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = T::SQRT_2() * x * h0;
    for j in 1..k {
        let next = step(j, x, cur, prev);
        prev = cur;
        cur = next;
    }
    cur
}

#[inline]
fn step<T: Scalar>(j: usize, x: T, cur: T, prev: T) -> T {
    let jf = T::from_usize_lossy(j);
    let jp1 = jf + T::one();
    (T::lit(2.0) / jp1).sqrt() * x * cur - (jf / jp1).sqrt() * prev
}

/// (h_0(x), …, h_{k_max}(x)) from a single recurrence pass.
pub fn hermite_function_row<T: Scalar>(k_max: usize, x: T) -> Vec<T> {
    let mut row = Vec::with_capacity(k_max + 1);
    let h0 = pi_pow_neg_quarter::<T>() * (-x * x * T::lit(0.5)).exp();
    row.push(h0);
    if k_max == 0 {
        return row;
    }
    row.push(T::SQRT_2() * x * h0);
    for j in 1..k_max {
        let next = step(j, x, row[j], row[j - 1]);
        row.push(next);
    }
    row
}

/// h̄_k(x) = 1/2 + (π^{1/4}/2) h_k(x), a payoff in [0, 1].
pub fn bar_hermite<T: Scalar>(k: usize, x: T) -> T {
    bar_from_value(hermite_function(k, x))
}

#[inline]
pub(crate) fn bar_from_value<T: Scalar>(h: T) -> T {
    let v = T::lit(0.5) + T::PI().powf(T::lit(0.25)) * T::lit(0.5) * h;
    // rounding can push |h| a few ulps past π^{-1/4}
    v.max(T::zero()).min(T::one())
}

fn check_in_window<T: Scalar>(window: TruncationWindow<T>, x: T) -> Result<()> {
    if window.contains(x) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "x = {x} outside the window [-{l}, {l}]",
            l = window.half_width()
        )))
    }
}

/// 𝓗_{k,L}(x) = ∫_{−L}^{x} h_k(t) dt for −L ≤ x ≤ L.
pub fn hermite_integral<T: Scalar>(k: usize, window: TruncationWindow<T>, x: T) -> Result<T> {
    Ok(hermite_integral_row(k, window, x)?[k])
}

/// (𝓗_{0,L}(x), …, 𝓗_{k_max,L}(x)).
///
/// Integrating h_k' = √(k/2) h_{k−1} − √((k+1)/2) h_{k+1} over [−L, x] gives
///
/// ```text
/// 𝓗_{k+1} = √(k/(k+1)) 𝓗_{k−1} − √(2/(k+1)) (h_k(x) − h_k(−L))
/// ```
///
/// seeded by the closed forms for k = 0 (normal CDF) and k = 1 (Gaussian).
pub fn hermite_integral_row<T: Scalar>(
    k_max: usize,
    window: TruncationWindow<T>,
    x: T,
) -> Result<Vec<T>> {
    check_in_window(window, x)?;
    let l = window.half_width();
    let c = pi_pow_neg_quarter::<T>();
    let two = T::lit(2.0);

    // Φ(x) − Φ(−L), arranged so that neither tail is formed as 1 − small.
    let mass = if x <= T::zero() {
        std_normal_cdf(x) - std_normal_cdf(-l)
    } else {
        T::one() - std_normal_cdf(-x) - std_normal_cdf(-l)
    };
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(c * (two * T::PI()).sqrt() * mass);
    if k_max == 0 {
        return Ok(out);
    }
    let half = T::lit(0.5);
    out.push(-T::SQRT_2() * c * ((-x * x * half).exp() - (-l * l * half).exp()));
    if k_max == 1 {
        return Ok(out);
    }
    let hx = hermite_function_row(k_max - 1, x);
    let hl = hermite_function_row(k_max - 1, -l);
    for k in 1..k_max {
        let kf = T::from_usize_lossy(k);
        let kp1 = kf + T::one();
        let next = (kf / kp1).sqrt() * out[k - 1] - (two / kp1).sqrt() * (hx[k] - hl[k]);
        out.push(next);
    }
    Ok(out)
}

/// Physicists' Hermite polynomial coefficients: H_k(x) = Σ_l c[l] x^l.
fn hermite_poly_coefficients(k: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0];
    for j in 1..k {
        // H_{j+1} = 2x H_j − 2j H_{j−1}
        let mut next = vec![0.0; j + 2];
        for (l, &c) in cur.iter().enumerate() {
            next[l + 1] += 2.0 * c;
        }
        for (l, &c) in prev.iter().enumerate() {
            next[l] -= 2.0 * j as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn hermite_norm(k: usize) -> f64 {
    let mut fact = 1.0;
    for j in 1..=k {
        fact *= j as f64;
    }
    1.0 / (2f64.powi(k as i32) * fact * std::f64::consts::PI.sqrt()).sqrt()
}

/// h_k(x) through the monomial expansion of H_k. Loses precision quickly
/// with k; valid as a cross-check for k ≤ 10 only.
pub fn hermite_function_monomial(k: usize, x: f64) -> f64 {
    let poly: f64 = hermite_poly_coefficients(k)
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * x + c);
    hermite_norm(k) * poly * (-x * x / 2.0).exp()
}

/// (1/√(2π)) ∫_{−∞}^{x} y^l e^{−y²/2} dy via the moment recurrence
/// M_l = −x^{l−1} e^{−x²/2}/√(2π) + (l−1) M_{l−2}.
fn gaussian_partial_moments(l_max: usize, x: f64) -> Vec<f64> {
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let g = (-x * x / 2.0).exp();
    let mut m = vec![std_normal_cdf(x)];
    if l_max >= 1 {
        m.push(-inv_sqrt_2pi * g);
    }
    for l in 2..=l_max {
        let v = -inv_sqrt_2pi * x.powi(l as i32 - 1) * g + (l as f64 - 1.0) * m[l - 2];
        m.push(v);
    }
    m
}

/// 𝓗_{k,L}(x) assembled from Gaussian partial moments and the monomial
/// coefficients of H_k. Cross-check for k ≤ 10.
pub fn hermite_integral_monomial(k: usize, half_width: f64, x: f64) -> f64 {
    let coeffs = hermite_poly_coefficients(k);
    let upper = gaussian_partial_moments(k, x);
    let lower = gaussian_partial_moments(k, -half_width);
    // h_k(t) = N_k H_k(t) e^{-t²/2} = N_k √(2π) Σ c_l t^l φ(t)
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(l, c)| c * (upper[l] - lower[l]))
        .sum();
    hermite_norm(k) * (2.0 * std::f64::consts::PI).sqrt() * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Values from a 40-digit mpmath evaluation of the monomial definition.
    const H0_0: f64 = 0.751_125_544_464_942_5;
    const H2_0: f64 = -0.531_125_966_013_598_5;

    fn win(l: f64) -> TruncationWindow<f64> {
        TruncationWindow::new(l).unwrap()
    }

    #[test]
    fn low_order_values_at_origin() {
        assert_abs_diff_eq!(hermite_function(0, 0.0), H0_0, epsilon = 1e-15);
        assert_eq!(hermite_function(1, 0.0_f64), 0.0);
        assert_abs_diff_eq!(hermite_function(2, 0.0), H2_0, epsilon = 1e-15);
    }

    #[test]
    fn higher_order_reference_values() {
        assert_abs_diff_eq!(
            hermite_function(5, 1.7),
            -0.364_980_690_780_489_9,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            hermite_function(30, 2.2),
            0.093_042_495_844_072_38,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            hermite_function(60, -7.5),
            0.277_184_176_965_756_4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn row_matches_pointwise_evaluation() {
        let row = hermite_function_row(2, 0.0_f64);
        assert_eq!(row.len(), 3);
        assert_abs_diff_eq!(row[0], H0_0, epsilon = 1e-15);
        assert_eq!(row[1], 0.0);
        assert_abs_diff_eq!(row[2], H2_0, epsilon = 1e-15);
        assert_eq!(
            hermite_function_row(0, 0.0_f64),
            vec![hermite_function(0, 0.0)]
        );
        let x = 1.37;
        let row = hermite_function_row(40, x);
        for (k, v) in row.iter().enumerate() {
            assert_eq!(*v, hermite_function(k, x));
        }
    }

    #[test]
    fn row_parity() {
        let x = 0.83;
        let pos = hermite_function_row(5, x);
        let neg = hermite_function_row(5, -x);
        for k in 0..=5 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_abs_diff_eq!(neg[k], sign * pos[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn bar_hermite_values() {
        assert_abs_diff_eq!(bar_hermite(0, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bar_hermite(1, 0.0), 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(
            bar_hermite(2, 0.0),
            0.146_446_609_406_726_24,
            epsilon = 1e-15
        );
    }

    #[test]
    fn monomial_cross_check_low_order() {
        for k in 0..=10 {
            for x in [-3.1, -0.4, 0.0, 0.9, 2.6] {
                assert_abs_diff_eq!(
                    hermite_function(k, x),
                    hermite_function_monomial(k, x),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn integral_empty_interval_is_zero() {
        for k in 0..12 {
            assert_abs_diff_eq!(
                hermite_integral(k, win(4.0), -4.0).unwrap(),
                0.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn integral_odd_order_symmetric_interval() {
        assert_abs_diff_eq!(
            hermite_integral(1, win(5.0), 5.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn integral_reference_values() {
        assert_abs_diff_eq!(
            hermite_integral(0, win(5.0), 0.0).unwrap(),
            0.941_395_724_071_277_3,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            hermite_integral(3, win(5.0), 1.3).unwrap(),
            -0.815_836_825_002_785_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            hermite_integral(7, win(3.0), -0.4).unwrap(),
            0.081_408_981_246_956_07,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            hermite_integral(10, win(8.0), 2.5).unwrap(),
            0.570_921_942_282_051,
            epsilon = 1e-12
        );
    }

    #[test]
    fn integral_monomial_cross_check() {
        for k in 0..=10 {
            for (l, x) in [(3.0, 1.1), (5.0, -2.0), (8.0, 7.9)] {
                assert_abs_diff_eq!(
                    hermite_integral(k, win(l), x).unwrap(),
                    hermite_integral_monomial(k, l, x),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn integral_outside_window_is_domain_error() {
        assert!(matches!(
            hermite_integral(2, win(3.0), 3.5),
            Err(Error::Domain(_))
        ));
        assert!(hermite_integral(2, win(3.0), -3.0001).is_err());
    }

    #[test]
    fn window_must_be_positive() {
        assert!(TruncationWindow::new(0.0_f64).is_err());
        assert!(TruncationWindow::new(-1.0_f64).is_err());
        assert!(TruncationWindow::new(f64::INFINITY).is_err());
    }

    #[test]
    fn single_precision_instantiation() {
        let v = hermite_function(2, 0.0_f32);
        assert!((v - H2_0 as f32).abs() < 1e-6);
        let w = TruncationWindow::new(5.0_f32).unwrap();
        assert!((hermite_integral(0, w, 0.0).unwrap() - 0.941_395_7).abs() < 1e-5);
    }
}
