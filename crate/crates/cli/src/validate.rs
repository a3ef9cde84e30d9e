//! Built-in invariant suite behind the `validate` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskagg::copula::{CopulaModel, DEFAULT_BOUNDS_RESOLUTION};
use riskagg::marginals::{discretize, MarginalSpec};
use riskagg::osde::{est_marg, probe_grid, sup_error};
use riskagg::qae::{outcome_distribution, QaeOutcomeSampler, SUCCESS_PROBABILITY};
use riskagg::quadrature::{integrate, integrate_piecewise};
use riskagg::special::{
    hermite_function, hermite_function_row, hermite_integral_row, std_normal_cdf, TruncationWindow,
};
use riskagg::{QaeMode, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub orthonormality_tol: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            orthonormality_tol: 1e-8,
        }
    }
}

/// max |∫ h_k h_l − δ_kl| over 0 ≤ k ≤ l ≤ `k_max`, integrated over [−12, 12].
pub fn orthonormality_error(k_max: usize) -> f64 {
    let breaks: Vec<f64> = (0..=48).map(|i| -12.0 + 0.5 * f64::from(i)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..=k_max {
        for l in k..=k_max {
            let v = integrate_piecewise(
                |x| {
                    let r = hermite_function_row(l, x);
                    r[k] * r[l]
                },
                &breaks,
                1e-13,
            );
            let want = if k == l { 1.0 } else { 0.0 };
            worst = worst.max((v - want).abs());
        }
    }
    worst
}

/// max |h_k(x)| over `draws` random (k ≤ 60, |x| ≤ 10).
pub fn amplitude_max(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws)
        .map(|_| {
            let k = rng.random_range(0..=60);
            let x: f64 = rng.random_range(-10.0..=10.0);
            hermite_function(k, x).abs()
        })
        .fold(0.0, f64::max)
}

/// max deviation of the integral recurrence from adaptive quadrature for
/// k ≤ `k_max`, `probes` midpoints per window.
pub fn integral_recurrence_error(k_max: usize, half_widths: &[f64], probes: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for &l in half_widths {
        let w = TruncationWindow::new(l).expect("positive half-width");
        for i in 0..probes {
            let x = -l + 2.0 * l * (i as f64 + 0.5) / probes as f64;
            let row = hermite_integral_row(k_max, w, x).expect("x inside the window");
            for (k, &got) in row.iter().enumerate() {
                let want = integrate(|t| hermite_function(k, t), -l, x, 1e-13);
                worst = worst.max((got - want).abs());
            }
        }
    }
    worst
}

/// 2π√(a(1−a))/t + π²/t².
pub fn qae_error_band(a: f64, t: u64) -> f64 {
    let tf = t as f64;
    2.0 * std::f64::consts::PI * (a * (1.0 - a)).sqrt() / tf
        + std::f64::consts::PI.powi(2) / (tf * tf)
}

/// Smallest in-band fraction over the (a, t) combinations, `draws` each.
pub fn qae_min_coverage(amplitudes: &[f64], precisions: &[u64], draws: usize, seed: u64) -> f64 {
    let stream = RngStream::new(seed);
    let mut worst: f64 = 1.0;
    for (i, &a) in amplitudes.iter().enumerate() {
        for &t in precisions {
            let s = QaeOutcomeSampler::new(a, t).expect("valid amplitude and precision");
            let mut rng = stream.child("coverage", (i as u64) << 32 | t).rng();
            let inside = (0..draws)
                .filter(|_| (s.sample(&mut rng) - a).abs() <= qae_error_band(a, t))
                .count();
            worst = worst.min(inside as f64 / draws as f64);
        }
    }
    worst
}

fn orthonormality(opts: &SuiteOptions) -> Check {
    let worst = orthonormality_error(30);
    Check::new(
        "hermite_orthonormality",
        worst <= opts.orthonormality_tol,
        format!(
            "max deviation {worst:.3e}, tolerance {:.1e}",
            opts.orthonormality_tol
        ),
    )
}

fn amplitude_bound() -> Check {
    let max = amplitude_max(10_000, 17);
    let bound = std::f64::consts::PI.powf(-0.25) + 1e-12;
    Check::new(
        "hermite_amplitude_bound",
        max <= bound,
        format!("max |h_k(x)| {max:.15}, bound {bound:.15}"),
    )
}

fn integral_recurrence() -> Check {
    let worst = integral_recurrence_error(40, &[3.0, 5.0, 8.0], 25);
    Check::new(
        "hermite_integral_recurrence",
        worst <= 1e-8,
        format!("max deviation {worst:.3e}"),
    )
}

fn qae_coverage() -> Check {
    let worst = qae_min_coverage(&[0.1, 0.25, 0.5, 0.9], &[16, 64, 256], 10_000, 2024);
    let need = SUCCESS_PROBABILITY - 0.02;
    Check::new(
        "qae_coverage",
        worst >= need,
        format!("smallest in-band fraction {worst:.4}, need {need:.4}"),
    )
}

fn qae_normalization() -> Check {
    let mut worst: f64 = 0.0;
    for &a in &[0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
        for m in 1..=12 {
            let p = outcome_distribution(a, 1 << m).expect("valid amplitude");
            worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Check::new(
        "qae_outcome_normalization",
        worst <= 1e-9,
        format!("max |sum - 1| {worst:.3e}"),
    )
}

fn copula_bounds() -> Check {
    let mut model = CopulaModel::<f64>::gaussian_2d(0.5).expect("valid correlation");
    let b = model.compute_bounds(DEFAULT_BOUNDS_RESOLUTION);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut max: f64 = 0.0;
    for _ in 0..20_000 {
        let u = [rng.random::<f64>(), rng.random::<f64>()];
        max = max.max(model.density(&u).expect("two coordinates"));
    }
    Check::new(
        "copula_bounds_dominate_density",
        max <= b.c_max && b.c_prime_max.is_finite(),
        format!(
            "sampled max {max:.4}, c_max {:.4}, c'_max {:.4}",
            b.c_max, b.c_prime_max
        ),
    )
}

fn copula_normalization() -> Check {
    let m = CopulaModel::<f64>::gaussian_2d(0.5).expect("valid correlation");
    let clip = m.clip();
    let n = 300;
    let h = (1.0 - 2.0 * clip) / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let u = clip + (i as f64 + 0.5) * h;
            let v = clip + (j as f64 + 0.5) * h;
            total += m.density(&[u, v]).expect("two coordinates") * h * h;
        }
    }
    Check::new(
        "copula_density_integrates_to_one",
        (total - 1.0).abs() <= 0.02,
        format!("integral {total:.5}"),
    )
}

fn marginal_cdf_bound() -> Check {
    let spec = MarginalSpec::standard_normal();
    let dm = discretize(&spec, 10, -8.0, 8.0).expect("valid grid");
    let w = TruncationWindow::new(4.0).expect("positive half-width");
    let (ec, _) = est_marg(&dm, 31, w, 0.05, 0.1, QaeMode::Exact, &RngStream::new(0))
        .expect("grid spans the window");
    let err = sup_error(&ec, std_normal_cdf, &probe_grid(w, 400));
    Check::new(
        "marginal_cdf_exact_bound",
        err <= 0.05,
        format!("sup error {err:.3e} at L = 4, K = 31, eps = 0.05"),
    )
}

pub fn run_suite(opts: &SuiteOptions) -> Vec<Check> {
    vec![
        orthonormality(opts),
        amplitude_bound(),
        integral_recurrence(),
        qae_coverage(),
        qae_normalization(),
        copula_bounds(),
        copula_normalization(),
        marginal_cdf_bound(),
    ]
}
