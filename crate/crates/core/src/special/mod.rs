//! Special functions: orthonormal Hermite functions and their integrals,
//! the clipped payoff `h̄_k`, and the normal / Student-t distributions.
//!
//! Everything here is a pure function of its arguments.

mod gamma;
mod hermite;
mod normal;
mod student_t;

pub use gamma::{ln_gamma, regularized_incomplete_beta};
pub(crate) use hermite::bar_from_value;
pub use hermite::{
    bar_hermite, hermite_function, hermite_function_monomial, hermite_function_row,
    hermite_integral, hermite_integral_monomial, hermite_integral_row, TruncationWindow,
};
pub use normal::{erf, erfc, std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use student_t::{student_t_cdf, student_t_ln_pdf, student_t_pdf, student_t_quantile};
