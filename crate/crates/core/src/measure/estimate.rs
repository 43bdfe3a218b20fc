//! Outcome sampling and maximum-likelihood estimation of `theta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::{cfi_exact, distribution, OutcomeDistribution, Strategy};
use crate::error::{Error, Result};
use crate::fisher::Derivative;
use crate::states::EncodedPair;

const GRID_POINTS: usize = 41;
const GOLDEN_TOL: f64 = 1e-7;
const BOUNDARY_TOL: f64 = 1e-6;
const EDGE: f64 = 1e-9;

/// Closed search interval for the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchWindow {
    pub lo: f64,
    pub hi: f64,
}

impl SearchWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("empty search window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// `[theta - half_width, theta + half_width]` clamped inside `(0, pi/2)`.
    pub fn around(theta: f64, half_width: f64) -> Result<Self> {
        let top = std::f64::consts::FRAC_PI_2 - EDGE;
        Self::new((theta - half_width).max(EDGE), (theta + half_width).min(top))
    }
}

/// Multinomial draw of `shots` outcomes as sequential conditional binomials.
pub fn sample_outcomes<R: Rng + ?Sized>(dist: &OutcomeDistribution, shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    let mut counts = vec![0u64; dist.probs.len()];
    let mut left = shots;
    let mut mass = 1.0;
    for (k, &p) in dist.probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == dist.probs.len() || mass <= 0.0 {
            counts[k] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).map_err(|e| Error::Config(e.to_string()))?.sample(rng);
        counts[k] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MleFit {
    pub estimate: f64,
    pub log_likelihood: f64,
    /// Maximum sits on the edge of the search window.
    pub at_boundary: bool,
}

fn log_likelihood(counts: &[u64], probs: &[f64]) -> f64 {
    counts.iter().zip(probs).filter(|(n, _)| **n > 0).map(|(n, p)| *n as f64 * p.max(1e-300).ln()).sum()
}

/// Grid scan followed by golden-section refinement of the log-likelihood.
pub fn mle_estimate<F>(counts: &[u64], model: F, window: SearchWindow) -> Result<MleFit>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let ll = |theta: f64| -> Result<f64> {
        let probs = model(theta)?;
        if probs.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: counts.len(), got: probs.len() });
        }
        Ok(log_likelihood(counts, &probs))
    };
    let step = (window.hi - window.lo) / (GRID_POINTS - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..GRID_POINTS {
        let v = ll(window.lo + step * i as f64)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let mut a = window.lo + step * best.0.saturating_sub(1) as f64;
    let mut b = (window.lo + step * (best.0 + 1) as f64).min(window.hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (ll(x1)?, ll(x2)?);
    while b - a > GOLDEN_TOL {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = ll(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = ll(x1)?;
        }
    }
    let estimate = 0.5 * (a + b);
    let at_boundary = estimate - window.lo < BOUNDARY_TOL || window.hi - estimate < BOUNDARY_TOL;
    Ok(MleFit { estimate, log_likelihood: ll(estimate)?, at_boundary })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationRun {
    pub true_theta: f64,
    pub shots: u64,
    pub outcomes: Vec<u64>,
    pub estimate: f64,
    pub at_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationReport {
    pub strategy: Strategy,
    pub true_theta: f64,
    pub shots: u64,
    pub repetitions: usize,
    pub seed: u64,
    pub window: SearchWindow,
    pub mean_estimate: f64,
    pub variance: f64,
    pub fisher: f64,
    /// `1 / (shots * fisher)`.
    pub crb: f64,
    pub ratio: f64,
    pub boundary_hits: usize,
    pub estimates: Vec<f64>,
}

/// One simulated experiment: sample `shots` outcomes at the true angle and fit.
pub fn estimate_once<R: Rng + ?Sized>(
    pair: &EncodedPair,
    strategy: Strategy,
    shots: u64,
    window: SearchWindow,
    rng: &mut R,
) -> Result<EstimationRun> {
    let truth = distribution(strategy, pair)?;
    let outcomes = sample_outcomes(&truth, shots, rng)?;
    let fit = mle_estimate(&outcomes, |t| Ok(distribution(strategy, &pair.at(t)?)?.probs), window)?;
    Ok(EstimationRun { true_theta: pair.theta, shots, outcomes, estimate: fit.estimate, at_boundary: fit.at_boundary })
}

/// Repeats [`estimate_once`] with seeds `seed ^ rep` and compares the
/// empirical variance with the Cramer-Rao bound at the true angle.
pub fn estimate_repeated(
    pair: &EncodedPair,
    strategy: Strategy,
    shots: u64,
    repetitions: usize,
    seed: u64,
    window: SearchWindow,
) -> Result<EstimationReport> {
    if repetitions < 2 {
        return Err(Error::Config("need at least two repetitions for a variance".into()));
    }
    if shots == 0 {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    let runs: Vec<EstimationRun> = (0..repetitions)
        .into_par_iter()
        .map(|r| estimate_once(pair, strategy, shots, window, &mut ChaCha8Rng::seed_from_u64(seed ^ r as u64)))
        .collect::<Result<_>>()?;
    let estimates: Vec<f64> = runs.iter().map(|r| r.estimate).collect();
    let mean = estimates.iter().sum::<f64>() / repetitions as f64;
    let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (repetitions - 1) as f64;
    let fisher = cfi_exact(strategy, pair, Derivative::Analytic)?;
    let crb = 1.0 / (shots as f64 * fisher);
    Ok(EstimationReport {
        strategy,
        true_theta: pair.theta,
        shots,
        repetitions,
        seed,
        window,
        mean_estimate: mean,
        variance,
        fisher,
        crb,
        ratio: variance / crb,
        boundary_hits: runs.iter().filter(|r| r.at_boundary).count(),
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{ghz_pair, EncodingMode};

    fn dist(probs: Vec<f64>) -> OutcomeDistribution {
        let n = probs.len();
        OutcomeDistribution::new(Strategy::Lst, 0.0, (0..n).map(|k| k.to_string()).collect(), probs, vec![1; n])
            .unwrap()
    }

    #[test]
    fn zero_shots_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_outcomes(&dist(vec![0.5, 0.5]), 0, &mut rng).is_err());
    }

    #[test]
    fn point_mass_lands_in_first_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_outcomes(&dist(vec![1.0, 0.0, 0.0]), 1000, &mut rng).unwrap(), vec![1000, 0, 0]);
    }

    #[test]
    fn counts_concentrate() {
        let probs = vec![0.1, 0.25, 0.05, 0.6];
        let shots = 100_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let counts = sample_outcomes(&dist(probs.clone()), shots, &mut rng).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), shots);
        for (c, p) in counts.iter().zip(&probs) {
            let sigma = (p * (1.0 - p) / shots as f64).sqrt();
            assert!((*c as f64 / shots as f64 - p).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = dist(vec![0.3, 0.3, 0.4]);
        let a = sample_outcomes(&d, 5000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_outcomes(&d, 5000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_counts_recover_truth() {
        let truth = 0.05;
        let pair = ghz_pair(2, truth, EncodingMode::Reversed).unwrap();
        let shots = 1e9;
        for strategy in [Strategy::Lbm, Strategy::Dm, Strategy::Gst] {
            let d = distribution(strategy, &pair).unwrap();
            let counts: Vec<u64> = d.probs.iter().map(|p| (p * shots).round() as u64).collect();
            let window = SearchWindow::around(truth, 0.5).unwrap();
            let fit = mle_estimate(&counts, |t| Ok(distribution(strategy, &pair.at(t)?)?.probs), window).unwrap();
            assert!((fit.estimate - truth).abs() < 1e-6, "{strategy}: {}", fit.estimate);
            assert!(!fit.at_boundary);
        }
    }

    #[test]
    fn boundary_maximum_is_flagged() {
        let pair = ghz_pair(2, 0.05, EncodingMode::Reversed).unwrap();
        let d = distribution(Strategy::Lbm, &pair).unwrap();
        let counts: Vec<u64> = d.probs.iter().map(|p| (p * 1e6).round() as u64).collect();
        let window = SearchWindow::new(0.3, 0.6).unwrap();
        let fit = mle_estimate(&counts, |t| Ok(distribution(Strategy::Lbm, &pair.at(t)?)?.probs), window).unwrap();
        assert!(fit.at_boundary);
    }

    #[test]
    fn window_clamps_to_open_quadrant() {
        let w = SearchWindow::around(0.05, 0.5).unwrap();
        assert!(w.lo > 0.0 && w.lo < 1e-8);
        assert!((w.hi - 0.55).abs() < 1e-15);
        let w = SearchWindow::around(1.5, 0.5).unwrap();
        assert!(w.hi < std::f64::consts::FRAC_PI_2);
        assert!(SearchWindow::new(1.0, 1.0).is_err());
    }

    #[test]
    fn repeated_estimation_is_reproducible() {
        let pair = ghz_pair(2, 0.05, EncodingMode::Reversed).unwrap();
        let w = SearchWindow::around(0.05, 0.5).unwrap();
        let a = estimate_repeated(&pair, Strategy::Lbm, 2000, 8, 42, w).unwrap();
        let b = estimate_repeated(&pair, Strategy::Lbm, 2000, 8, 42, w).unwrap();
        assert_eq!(a, b);
        assert!(estimate_repeated(&pair, Strategy::Lbm, 0, 8, 42, w).is_err());
    }
}
