#![allow(dead_code)]

/// Kolmogorov survival function Q(λ) = 2 Σ (−1)^{j−1} exp(−2 j² λ²).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = f64::from(j);
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS p-value of `xs` against the uniform law on [0, 1].
pub fn ks_uniform_pvalue(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

fn quadrant_fractions(pts: &[(f64, f64)], x: f64, y: f64) -> [f64; 4] {
    let mut c = [0usize; 4];
    for &(a, b) in pts {
        let i = match (a > x, b > y) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        };
        c[i] += 1;
    }
    let n = pts.len() as f64;
    c.map(|k| k as f64 / n)
}

fn pearson(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pearson(&pts)
}

/// Two-sample two-dimensional KS test (Fasano–Franceschini statistic with
/// the Press et al. significance approximation). Returns the p-value.
pub fn ks2d_pvalue(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut d: f64 = 0.0;
    for pts in [a, b] {
        for &(x, y) in pts {
            let fa = quadrant_fractions(a, x, y);
            let fb = quadrant_fractions(b, x, y);
            for q in 0..4 {
                d = d.max((fa[q] - fb[q]).abs());
            }
        }
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let ne = n1 * n2 / (n1 + n2);
    let r = 0.5 * (pearson(a) + pearson(b));
    let sn = ne.sqrt();
    kolmogorov_q(sn * d / (1.0 + (1.0 - r * r).sqrt() * (0.25 - 0.75 / sn)))
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}
