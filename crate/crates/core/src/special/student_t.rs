use super::gamma::{ln_gamma, regularized_incomplete_beta};
use super::normal::std_normal_quantile;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_dof<T: Scalar>(nu: T) -> Result<()> {
    if nu > T::zero() && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "degrees of freedom must be positive, got {nu}"
        )))
    }
}

pub fn student_t_ln_pdf<T: Scalar>(nu: T, x: T) -> T {
    let half = T::lit(0.5);
    ln_gamma((nu + T::one()) * half)
        - ln_gamma(nu * half)
        - half * (nu * T::PI()).ln()
        - (nu + T::one()) * half * (x * x / nu).ln_1p()
}

pub fn student_t_pdf<T: Scalar>(nu: T, x: T) -> T {
    student_t_ln_pdf(nu, x).exp()
}

/// CDF t_ν(x) through the incomplete beta function.
pub fn student_t_cdf<T: Scalar>(nu: T, x: T) -> Result<T> {
    check_dof(nu)?;
    if x.is_infinite() {
        return Ok(if x > T::zero() { T::one() } else { T::zero() });
    }
    let x2 = x * x;
    let denom = nu + x2;
    let tail = T::lit(0.5)
        * regularized_incomplete_beta(nu * T::lit(0.5), T::lit(0.5), nu / denom, x2 / denom);
    Ok(if x > T::zero() { T::one() - tail } else { tail })
}

/// Inverse of [`student_t_cdf`] for p in (0, 1).
pub fn student_t_quantile<T: Scalar>(nu: T, p: T) -> Result<T> {
    check_dof(nu)?;
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Domain(format!(
            "t quantile needs p in (0,1), got {p}"
        )));
    }
    if nu == T::one() {
        return Ok((T::PI() * (p - T::lit(0.5))).tan());
    }
    if nu == T::lit(2.0) {
        let two_p = T::lit(2.0) * p;
        return Ok((two_p - T::one()) / (two_p * (T::one() - p)).sqrt());
    }
    let upper = p > T::lit(0.5);
    let q = if upper { T::one() - p } else { p };
    if q == T::lit(0.5) {
        return Ok(T::zero());
    }

    // Cornish-Fisher start around the normal quantile, then safeguarded Newton
    // on the bracket [lo, 0] where the root lies in the lower tail.
    let z = std_normal_quantile(q)?;
    let z3 = z * z * z;
    let z5 = z3 * z * z;
    let mut x = z
        + (z3 + z) / (T::lit(4.0) * nu)
        + (T::lit(5.0) * z5 + T::lit(16.0) * z3 + T::lit(3.0) * z) / (T::lit(96.0) * nu * nu);
    if !(x < T::zero()) || !x.is_finite() {
        x = z;
    }
    let mut hi = T::zero();
    let mut lo = x;
    let mut expand = 0;
    while student_t_cdf(nu, lo)? > q {
        hi = lo;
        lo = lo * T::lit(2.0) - T::one();
        expand += 1;
        if expand > 2000 || !lo.is_finite() {
            return Ok(if upper { -lo } else { lo });
        }
    }
    if x < lo || x > hi {
        x = (lo + hi) * T::lit(0.5);
    }
    for _ in 0..200 {
        let f = student_t_cdf(nu, x)? - q;
        if f > T::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - f / student_t_pdf(nu, x);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo + hi) * T::lit(0.5);
        }
        let done = (next - x).abs() <= T::lit(4.0) * T::epsilon() * (T::one() + x.abs());
        x = next;
        if done {
            break;
        }
    }
    Ok(if upper { -x } else { x })
}
