//! Statistical simulation of amplitude estimation and the Monte Carlo
//! integration wrapper built on it.
//!
//! The simulator draws the phase-estimation outcome y ∈ {0, …, t−1} from its
//! closed-form distribution
//!
//! ```text
//! p(y) = ½ F(y/t − ω) + ½ F(y/t + ω),   F(Δ) = sin²(tπΔ) / (t² sin²(πΔ)),
//! ```
//!
//! with ω = arcsin(√a)/π, and reports ã = sin²(πy/t). Both branches map to
//! the same law of ã (y ↦ t − y leaves ã unchanged), so draws come from the
//! first branch only.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Largest half-window of offsets whose probabilities are tabulated exactly;
/// offsets further from the peak are drawn by rejection.
const WINDOW: u64 = 4096;

/// Largest supported number of oracle applications per QAE run.
pub const MAX_PRECISION: u64 = 1 << 62;

/// 8/π², the per-run probability of landing inside the error band.
pub const SUCCESS_PROBABILITY: f64 = 8.0 / (std::f64::consts::PI * std::f64::consts::PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaeMode {
    /// Draw outcomes from the phase-estimation distribution.
    #[default]
    Sampled,
    /// Return the exact amplitude while charging the same queries.
    Exact,
}

/// Oracle calls charged to state preparation (𝒜) and payoff rotation (W).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryLedger {
    pub state_prep_queries: u128,
    pub rotation_queries: u128,
}

impl QueryLedger {
    /// `repetitions` runs of QAE with `t` applications each.
    pub fn for_runs(repetitions: usize, t: u64) -> Self {
        let q = (repetitions as u128).saturating_mul(u128::from(t));
        Self {
            state_prep_queries: q,
            rotation_queries: q,
        }
    }

    /// Scales only the state-preparation count, e.g. when one joint
    /// preparation consists of `factor` single-marginal preparations.
    pub fn scale_state_prep(mut self, factor: u128) -> Self {
        self.state_prep_queries = self.state_prep_queries.saturating_mul(factor);
        self
    }

    pub fn total(&self) -> u128 {
        self.state_prep_queries
            .saturating_add(self.rotation_queries)
    }
}

impl Add for QueryLedger {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            state_prep_queries: self.state_prep_queries.saturating_add(o.state_prep_queries),
            rotation_queries: self.rotation_queries.saturating_add(o.rotation_queries),
        }
    }
}

impl AddAssign for QueryLedger {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for QueryLedger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Output of one [`qmci`] call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QmciResult<T: Scalar> {
    pub estimate: T,
    pub epsilon: T,
    pub delta: T,
    pub repetitions: usize,
    /// Oracle applications per QAE run.
    pub precision: u64,
    pub ledger: QueryLedger,
}

fn phase_of(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!(
            "amplitude must lie in [0,1], got {a}"
        )));
    }
    Ok(a.sqrt().asin() / std::f64::consts::PI)
}

fn check_precision(t: u64) -> Result<()> {
    if t < 2 || !t.is_power_of_two() || t > MAX_PRECISION {
        return Err(Error::InvalidParameter(format!(
            "QAE precision must be a power of two in [2, 2^62], got {t}"
        )));
    }
    Ok(())
}

/// Full two-branch outcome distribution p(0), …, p(t−1). Intended for
/// checks; the cost is linear in t.
pub fn outcome_distribution(a: f64, t: u64) -> Result<Vec<f64>> {
    check_precision(t)?;
    let omega = phase_of(a)?;
    let tf = t as f64;
    let fejer = |delta: f64| {
        // F is 1-periodic; reduce to (−½, ½] before testing for the peak
        let r = delta - delta.round();
        if r == 0.0 {
            1.0
        } else {
            let num = (tf * std::f64::consts::PI * r).sin();
            let den = (std::f64::consts::PI * r).sin();
            (num * num) / (tf * tf * den * den)
        }
    };
    Ok((0..t)
        .map(|y| {
            let yt = y as f64 / tf;
            0.5 * fejer(yt - omega) + 0.5 * fejer(yt + omega)
        })
        .collect())
}

/// Precomputed sampler for the QAE estimate ã at fixed (a, t).
#[derive(Debug, Clone)]
pub struct QaeOutcomeSampler {
    omega: f64,
    t: u64,
    frac: f64,
    // sin²(π·frac), the common numerator of every outcome probability
    numer: f64,
    // offsets −J+1 ..= J around the peak and their cumulative probabilities
    half_window: u64,
    cumulative: Vec<f64>,
}

impl QaeOutcomeSampler {
    pub fn new(a: f64, t: u64) -> Result<Self> {
        check_precision(t)?;
        let omega = phase_of(a)?;
        let tf = t as f64;
        let wt = omega * tf;
        let frac = wt - wt.floor();
        let s = (std::f64::consts::PI * frac).sin();
        let numer = s * s;
        let half_window = (t / 2).min(WINDOW);
        let mut cumulative = Vec::new();
        if frac != 0.0 {
            let j_lo = 1 - half_window as i64;
            let mut acc = 0.0;
            cumulative.reserve(2 * half_window as usize);
            for j in j_lo..=half_window as i64 {
                acc += Self::offset_probability(numer, frac, tf, j);
                cumulative.push(acc);
            }
        }
        Ok(Self {
            omega,
            t,
            frac,
            numer,
            half_window,
            cumulative,
        })
    }

    pub fn precision(&self) -> u64 {
        self.t
    }

    #[inline]
    fn offset_probability(numer: f64, frac: f64, tf: f64, j: i64) -> f64 {
        let s = (std::f64::consts::PI * (j as f64 - frac) / tf).sin();
        numer / (tf * tf * s * s)
    }

    /// Draws one estimate ã.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.frac == 0.0 {
            return self.estimate_at(0);
        }
        let window_mass = *self.cumulative.last().expect("nonempty window");
        let u: f64 = rng.random::<f64>();
        if u < window_mass || self.t / 2 <= WINDOW {
            let i = self.cumulative.partition_point(|&c| c <= u);
            let i = i.min(self.cumulative.len() - 1);
            return self.estimate_at(i as i64 + 1 - self.half_window as i64);
        }
        self.estimate_at(self.sample_tail(rng))
    }

    /// Rejection sampler for offsets outside the tabulated window. Uses
    /// p_j ≤ sin²(πf) / (4 (j − f)²) against envelopes proportional to
    /// 1/((j−1)j) on the right and 1/(i(i+1)), i = −j, on the left; both
    /// envelopes carry the same total mass, so each side is picked with
    /// probability ½.
    fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let tf = self.t as f64;
        let j_win = self.half_window as f64;
        let half_t = (self.t / 2) as f64;
        loop {
            let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
            let v = j_win / u;
            let (j, envelope) = if rng.random::<bool>() {
                let j = v.floor() + 1.0;
                if j > half_t {
                    continue;
                }
                (j, self.numer / (2.0 * (j - 1.0) * j))
            } else {
                let i = v.floor();
                if i > half_t - 1.0 {
                    continue;
                }
                (-i, self.numer / (2.0 * i * (i + 1.0)))
            };
            let p = Self::offset_probability(self.numer, self.frac, tf, j as i64);
            if rng.random::<f64>() * envelope <= p {
                return j as i64;
            }
        }
    }

    /// ã for outcome y = ⌊ωt⌋ + offset, evaluated as sin²(πω + π(offset − f)/t)
    /// so that large t loses no precision.
    fn estimate_at(&self, offset: i64) -> f64 {
        let s = (std::f64::consts::PI * (self.omega + (offset as f64 - self.frac) / self.t as f64))
            .sin();
        (s * s).clamp(0.0, 1.0)
    }
}

/// One simulated QAE run on amplitude `a` with `t` oracle applications.
pub fn qae_sample<R: Rng + ?Sized>(a: f64, t: u64, mode: QaeMode, rng: &mut R) -> Result<f64> {
    match mode {
        QaeMode::Exact => {
            check_precision(t)?;
            phase_of(a)?;
            Ok(a)
        }
        QaeMode::Sampled => Ok(QaeOutcomeSampler::new(a, t)?.sample(rng)),
    }
}

/// Number of runs m whose median fails with probability at most δ: the
/// smallest odd integer ≥ ln(1/δ) / (2 (8/π² − ½)²), and at least 1.
pub fn repetitions_for(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let gap = SUCCESS_PROBABILITY - 0.5;
    let m = ((1.0 / delta).ln() / (2.0 * gap * gap)).ceil().max(1.0) as usize;
    Ok(if m.is_multiple_of(2) { m + 1 } else { m })
}

/// Median of `repetitions_for(delta)` independent draws.
pub fn median_amplify<F: FnMut(usize) -> f64>(mut draw: F, delta: f64) -> Result<(f64, usize)> {
    let m = repetitions_for(delta)?;
    let mut draws: Vec<f64> = (0..m).map(&mut draw).collect();
    draws.sort_by(f64::total_cmp);
    Ok((draws[m / 2], m))
}

/// Smallest power of two t ≥ 4π/ε (and at least 2).
pub fn precision_for(epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    let need = 4.0 * std::f64::consts::PI / epsilon;
    if need > MAX_PRECISION as f64 {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon:e} needs more than 2^62 oracle applications"
        )));
    }
    Ok((need.ceil() as u64).next_power_of_two().max(2))
}

/// Estimates the amplitude `a` = 𝔼[φ] to within ε with probability ≥ 1 − δ.
///
/// Amplitudes within 1e-9 outside [0, 1] (round-off from the caller's
/// summation) are clamped; anything further out is a domain error.
pub fn qmci<T: Scalar>(
    amplitude: T,
    epsilon: T,
    delta: T,
    mode: QaeMode,
    stream: &RngStream,
) -> Result<QmciResult<T>> {
    let a = amplitude.to_f64_lossy();
    if !(-1e-9..=1.0 + 1e-9).contains(&a) {
        return Err(Error::Domain(format!(
            "amplitude must lie in [0,1], got {a}"
        )));
    }
    let a = a.clamp(0.0, 1.0);
    let t = precision_for(epsilon.to_f64_lossy())?;
    let d = delta.to_f64_lossy();
    let (estimate, repetitions) = match mode {
        QaeMode::Exact => (a, repetitions_for(d)?),
        QaeMode::Sampled => {
            let sampler = QaeOutcomeSampler::new(a, t)?;
            median_amplify(
                |r| sampler.sample(&mut stream.child("qae-run", r as u64).rng()),
                d,
            )?
        }
    };
    Ok(QmciResult {
        estimate: T::lit(estimate),
        epsilon,
        delta,
        repetitions,
        precision: t,
        ledger: QueryLedger::for_runs(repetitions, t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn band(a: f64, t: u64) -> f64 {
        let tf = t as f64;
        2.0 * std::f64::consts::PI * (a * (1.0 - a)).sqrt() / tf
            + std::f64::consts::PI.powi(2) / (tf * tf)
    }

    #[test]
    fn degenerate_phases_are_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_eq!(
                qae_sample(0.0, 64, QaeMode::Sampled, &mut rng).unwrap(),
                0.0
            );
            assert!((qae_sample(1.0, 8, QaeMode::Sampled, &mut rng).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn half_amplitude_coverage() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let s = QaeOutcomeSampler::new(0.5, 64).unwrap();
        let inside = (0..10_000)
            .filter(|_| (s.sample(&mut rng) - 0.5).abs() <= band(0.5, 64))
            .count();
        assert!(inside >= 8_100, "{inside}");
    }

    #[test]
    fn distribution_normalizes() {
        for &a in &[0.0, 0.013, 0.1, 0.25, 0.5, 0.77, 1.0] {
            for &t in &[2u64, 16, 64, 1024] {
                let p = outcome_distribution(a, t).unwrap();
                let s: f64 = p.iter().sum();
                assert!((s - 1.0).abs() < 1e-9, "a={a} t={t} sum={s}");
            }
        }
    }

    #[test]
    fn sampler_matches_distribution_small_t() {
        // empirical frequencies of ã against the enumerated law
        let (a, t) = (0.3, 16u64);
        let p = outcome_distribution(a, t).unwrap();
        let s = QaeOutcomeSampler::new(a, t).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let mut counts = vec![0usize; t as usize / 2 + 1];
        for _ in 0..n {
            let est = s.sample(&mut rng);
            let k = ((est.sqrt().asin() / std::f64::consts::PI) * t as f64).round() as usize;
            counts[k] += 1;
        }
        for k in 0..=t as usize / 2 {
            let mut want = p[k];
            if k != 0 && k != t as usize / 2 {
                want += p[t as usize - k];
            }
            let got = counts[k] as f64 / n as f64;
            assert!((got - want).abs() < 5e-3, "k={k} got={got} want={want}");
        }
    }

    #[test]
    fn tail_sampler_matches_enumeration() {
        // t = 2^15 exceeds the tabulated window, so tails go through rejection
        let (a, t) = (0.37, 1u64 << 15);
        let s = QaeOutcomeSampler::new(a, t).unwrap();
        let omega = a.sqrt().asin() / std::f64::consts::PI;
        let tf = t as f64;
        let p = outcome_distribution(a, t).unwrap();
        let far_from = |phase: f64| (phase - omega).abs() * tf > 4096.5;
        let far: f64 = p
            .iter()
            .enumerate()
            .filter(|&(y, _)| far_from(y.min(t as usize - y) as f64 / tf))
            .map(|(_, &py)| py)
            .sum();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 4_000_000;
        let mut hits = 0;
        for _ in 0..n {
            let est = s.sample(&mut rng);
            let phase = est.sqrt().asin() / std::f64::consts::PI;
            if far_from(phase) {
                hits += 1;
            }
        }
        let got = hits as f64 / n as f64;
        assert!(far > 1e-5);
        assert!(
            (got - far).abs() < 4.0 * (far / n as f64).sqrt() + 1e-5,
            "got={got} want={far}"
        );
    }

    #[test]
    fn huge_precision_concentrates() {
        let s = QaeOutcomeSampler::new(0.2, 1 << 50).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert!((s.sample(&mut rng) - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn repetition_counts() {
        assert_eq!(repetitions_for(0.1).unwrap(), 13);
        assert_eq!(repetitions_for(0.999).unwrap(), 1);
        assert!(repetitions_for(0.0).is_err());
        assert!(repetitions_for(1.0).is_err());
        for d in [0.5, 0.1, 0.01, 1e-6] {
            assert_eq!(repetitions_for(d).unwrap() % 2, 1);
        }
    }

    #[test]
    fn median_of_constant() {
        let (m, r) = median_amplify(|_| 0.42, 0.05).unwrap();
        assert_eq!(m, 0.42);
        assert_eq!(r % 2, 1);
    }

    #[test]
    fn precision_rule() {
        assert_eq!(precision_for(0.5).unwrap(), 32);
        assert_eq!(precision_for(0.02).unwrap(), 1024);
        assert_eq!(precision_for(0.999).unwrap(), 16);
        assert!(precision_for(1e-20).is_err());
    }

    #[test]
    fn qmci_trivial_amplitudes_and_ledger() {
        let s = RngStream::new(7);
        for mode in [QaeMode::Sampled, QaeMode::Exact] {
            let one = qmci(1.0, 0.05, 0.1, mode, &s).unwrap();
            assert!((one.estimate - 1.0f64).abs() < 1e-15);
            assert_eq!(
                one.ledger.state_prep_queries,
                one.repetitions as u128 * one.precision as u128
            );
            assert_eq!(one.ledger.rotation_queries, one.ledger.state_prep_queries);
            assert_eq!(qmci(0.0, 0.05, 0.1, mode, &s).unwrap().estimate, 0.0);
        }
        let a = qmci(0.3, 0.05, 0.1, QaeMode::Sampled, &s).unwrap();
        let b = qmci(0.3, 0.05, 0.1, QaeMode::Exact, &s).unwrap();
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(b.estimate, 0.3);
        assert!(qmci(0.3, 0.0, 0.1, QaeMode::Exact, &s).is_err());
        assert!(qmci(0.3, 0.1, 1.0, QaeMode::Exact, &s).is_err());
        assert!(qmci(1.5, 0.1, 0.1, QaeMode::Exact, &s).is_err());
    }

    #[test]
    fn ledger_arithmetic() {
        let a = QueryLedger::for_runs(3, 8);
        let b = QueryLedger::for_runs(1, 16);
        let c = a + b;
        assert_eq!(c.state_prep_queries, 40);
        assert_eq!(c.total(), 80);
        assert_eq!(c.scale_state_prep(2).state_prep_queries, 80);
        assert_eq!([a, b].into_iter().sum::<QueryLedger>(), c);
    }
}
