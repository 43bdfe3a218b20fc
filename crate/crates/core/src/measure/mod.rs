//! Measurement strategies on twirled two-copy states and their classical Fisher information.
//!
//! Outcomes are grouped into classes whose members share one probability, so
//! `probs` holds class totals and `multiplicities` the class sizes. Grouping
//! leaves the Fisher information unchanged.

pub mod estimate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{accumulate, accumulate_floored, overlap_jets, pattern_jets, walsh, Derivative, ZERO_FLOOR};
use crate::states::EncodedPair;
use crate::tensor::{BitMask, QuditLayout};
use crate::twirl::{GuiState, Jet, LuiState};

pub use estimate::{
    estimate_repeated, mle_estimate, sample_outcomes, EstimationReport, EstimationRun, MleFit, SearchWindow,
};

pub const PROB_FLOOR: f64 = 1e-14;
const NEG_PROB_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Local random measurement: both copies of each site in one local basis.
    Dm,
    /// Global random measurement: both copies in one global basis.
    Grm,
    /// Global SWAP test.
    Gst,
    /// Local SWAP test on every site.
    Lst,
    /// Local Bell-state measurement (qubits).
    Lbm,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Dm, Strategy::Grm, Strategy::Gst, Strategy::Lst, Strategy::Lbm];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Dm => "dm",
            Strategy::Grm => "grm",
            Strategy::Gst => "gst",
            Strategy::Lst => "lst",
            Strategy::Lbm => "lbm",
        }
    }

    /// Whether outcome statistics depend only on the global overlap.
    fn is_global(self) -> bool {
        matches!(self, Strategy::Grm | Strategy::Gst)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub strategy: Strategy,
    pub theta: f64,
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    pub multiplicities: Vec<u64>,
}

impl OutcomeDistribution {
    /// Clips `[-1e-12, 0)` to zero and renormalizes; larger violations are errors.
    pub fn new(
        strategy: Strategy,
        theta: f64,
        labels: Vec<String>,
        mut probs: Vec<f64>,
        multiplicities: Vec<u64>,
    ) -> Result<Self> {
        if labels.len() != probs.len() || multiplicities.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: probs.len(), got: labels.len() });
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < -NEG_PROB_TOL) {
            return Err(Error::NegativeProbability { index, value });
        }
        for p in probs.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::Config(format!("outcome probabilities sum to {total}")));
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        Ok(Self { strategy, theta, labels, probs, multiplicities })
    }
}

fn mask_label(prefix: &str, mask: usize, n: usize) -> String {
    format!("{prefix}={mask:0n$b}")
}

/// Class probabilities of a LUI-based strategy as a linear map of `c_a`.
fn lui_class_probs(strategy: Strategy, layout: QuditLayout, coeffs: &[f64]) -> Vec<f64> {
    let n = layout.n_sites();
    match strategy {
        Strategy::Lst | Strategy::Lbm => {
            let mut u = coeffs.to_vec();
            walsh(&mut u);
            let scale = 0.5f64.powi(n as i32);
            u.iter().map(|x| x * scale).collect()
        }
        Strategy::Dm => {
            let d = layout.local_dim() as f64;
            let norm = (d * d - 1.0).powi(n as i32).recip();
            (0..1usize << n)
                .map(|e| {
                    let same = e.count_ones() as i32;
                    let mult = d.powi(same) * (d * (d - 1.0)).powi(n as i32 - same);
                    let sum: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(a, c)| {
                            let factor: f64 = (0..n)
                                .map(|i| match ((a >> i) & 1, (e >> i) & 1) {
                                    (0, 0) => 1.0,
                                    (0, _) | (_, 1) => 1.0 - 1.0 / d,
                                    _ => -1.0 / d,
                                })
                                .product();
                            c * factor
                        })
                        .sum();
                    norm * mult * sum
                })
                .collect()
        }
        Strategy::Grm | Strategy::Gst => unreachable!("global strategies use the overlap"),
    }
}

/// Class probabilities of a global strategy from `[1, s]`.
fn global_class_probs(strategy: Strategy, layout: QuditLayout, one_s: [f64; 2]) -> Vec<f64> {
    let [one, s] = one_s;
    match strategy {
        Strategy::Gst => vec![(one + s) / 2.0, (one - s) / 2.0],
        Strategy::Grm => {
            let big_d = layout.dim() as f64;
            vec![(one + s) / (big_d + 1.0), (big_d * one - s) / (big_d + 1.0)]
        }
        _ => unreachable!("local strategies use the coefficients"),
    }
}

fn lui_labels(strategy: Strategy, layout: QuditLayout) -> (Vec<String>, Vec<u64>) {
    let n = layout.n_sites();
    let d = layout.local_dim() as u64;
    (0..1usize << n)
        .map(|m| {
            let k = m.count_ones();
            match strategy {
                Strategy::Dm => (mask_label("same", m, n), d.pow(k) * (d * (d - 1)).pow(n as u32 - k)),
                Strategy::Lst => (mask_label("b", m, n), 1),
                Strategy::Lbm => (mask_label("singlet", m, n), 3u64.pow(n as u32 - k)),
                _ => unreachable!(),
            }
        })
        .unzip()
}

fn global_labels(strategy: Strategy, layout: QuditLayout) -> (Vec<String>, Vec<u64>) {
    match strategy {
        Strategy::Gst => (vec!["+".into(), "-".into()], vec![1, 1]),
        Strategy::Grm => {
            let big_d = layout.dim() as u64;
            (vec!["same".into(), "different".into()], vec![big_d, big_d * (big_d - 1)])
        }
        _ => unreachable!(),
    }
}

fn check_lbm(layout: QuditLayout) -> Result<()> {
    if layout.local_dim() != 2 {
        return Err(Error::Unsupported("d = 2 for the local Bell measurement".into()));
    }
    Ok(())
}

fn lui_distribution(strategy: Strategy, lui: &LuiState) -> Result<OutcomeDistribution> {
    let (labels, mult) = lui_labels(strategy, lui.layout());
    let probs = lui_class_probs(strategy, lui.layout(), lui.coeffs());
    OutcomeDistribution::new(strategy, lui.theta(), labels, probs, mult)
}

fn global_distribution(strategy: Strategy, g: &GuiState) -> Result<OutcomeDistribution> {
    let (labels, mult) = global_labels(strategy, g.layout());
    let probs = global_class_probs(strategy, g.layout(), [1.0, g.s_global()]);
    OutcomeDistribution::new(strategy, g.theta(), labels, probs, mult)
}

/// Local random measurement grouped by the per-site coincidence pattern of
/// the two copies' outcomes.
pub fn probs_dm(lui: &LuiState) -> Result<OutcomeDistribution> {
    lui_distribution(Strategy::Dm, lui)
}

/// Global random measurement grouped into coincident and distinct outcomes.
pub fn probs_grm(g: &GuiState) -> Result<OutcomeDistribution> {
    global_distribution(Strategy::Grm, g)
}

/// Ancilla outcomes `p_+- = (1 +- s)/2` of the global SWAP test.
pub fn probs_gst(g: &GuiState) -> Result<OutcomeDistribution> {
    global_distribution(Strategy::Gst, g)
}

/// Ancilla bitstrings `p_b = 2^-N sum_a (-1)^{a.b} c_a` of the local SWAP tests.
pub fn probs_lst(lui: &LuiState) -> Result<OutcomeDistribution> {
    lui_distribution(Strategy::Lst, lui)
}

/// Bell patterns grouped by the singlet mask `b`; each class holds
/// `3^(N-|b|)` patterns.
pub fn probs_lbm(lui: &LuiState) -> Result<OutcomeDistribution> {
    check_lbm(lui.layout())?;
    lui_distribution(Strategy::Lbm, lui)
}

/// Probability of every one of the `4^N` Bell patterns. Digit `i` (base 4,
/// site 0 least significant) is 0 for the singlet and 1..=3 for the triplets.
pub fn lbm_pattern_probs(lui: &LuiState) -> Result<Vec<f64>> {
    let layout = lui.layout();
    check_lbm(layout)?;
    let n = layout.n_sites();
    let class = lui_class_probs(Strategy::Lbm, layout, lui.coeffs());
    Ok((0..1usize << (2 * n))
        .map(|pattern| {
            let b = (0..n).filter(|i| (pattern >> (2 * i)) & 3 == 0).fold(0, |acc, i| acc | 1 << i);
            class[b] / 3f64.powi(n as i32 - b.count_ones() as i32)
        })
        .collect())
}

pub fn distribution(strategy: Strategy, pair: &EncodedPair) -> Result<OutcomeDistribution> {
    if strategy.is_global() {
        global_distribution(strategy, &crate::twirl::gui_state(pair)?)
    } else {
        if strategy == Strategy::Lbm {
            check_lbm(pair.layout())?;
        }
        lui_distribution(strategy, &crate::twirl::lui_coefficients(pair)?)
    }
}

/// `F = sum_k (p_k')^2 / p_k`, with the double-zero limit for classes below
/// `1e-14`.
pub fn cfi(prob_jets: &[Jet]) -> Result<f64> {
    let (value, _) = accumulate(prob_jets.iter().enumerate().map(|(k, j)| (k as u64, 1.0, *j)), PROB_FLOOR)
        .map_err(negative_probability)?;
    Ok(value)
}

fn map_jets(jets: &[Jet], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Jet> {
    let v = f(&jets.iter().map(|j| j.value).collect::<Vec<_>>());
    let d1 = f(&jets.iter().map(|j| j.d1).collect::<Vec<_>>());
    let d2 = f(&jets.iter().map(|j| j.d2).collect::<Vec<_>>());
    (0..v.len()).map(|k| Jet { value: v[k], d1: d1[k], d2: d2[k] }).collect()
}

/// Class-probability jets of `strategy` on `pair`.
pub fn probability_jets(strategy: Strategy, pair: &EncodedPair, derivative: Derivative) -> Result<Vec<Jet>> {
    let layout = pair.layout();
    if strategy.is_global() {
        let s = crate::fisher::global_jet(pair, derivative)?;
        let jets = [Jet::constant(1.0), s];
        Ok(map_jets(&jets, |x| global_class_probs(strategy, layout, [x[0], x[1]])))
    } else {
        if strategy == Strategy::Lbm {
            check_lbm(layout)?;
        }
        if matches!(strategy, Strategy::Lst | Strategy::Lbm) {
            return Ok(pattern_probability_jets(pair, derivative)?.0);
        }
        let masks: Vec<BitMask> = BitMask::all(layout.n_sites()).collect();
        let c = overlap_jets(pair, &masks, derivative)?;
        Ok(map_jets(&c, |x| lui_class_probs(strategy, layout, x)))
    }
}

/// LST/LBM class jets `u_b / 2^N` and the floor each one is judged against.
fn pattern_probability_jets(pair: &EncodedPair, derivative: Derivative) -> Result<(Vec<Jet>, Vec<f64>)> {
    let scale = 0.5f64.powi(pair.layout().n_sites() as i32);
    let (u, refined) = pattern_jets(pair, derivative)?;
    let jets = u.into_iter().map(|j| Jet { value: j.value * scale, d1: j.d1 * scale, d2: j.d2 * scale }).collect();
    let floors = refined.into_iter().map(|r| if r { ZERO_FLOOR * scale } else { PROB_FLOOR }).collect();
    Ok((jets, floors))
}

/// Classical Fisher information of the exact outcome statistics of `strategy`.
pub fn cfi_exact(strategy: Strategy, pair: &EncodedPair, derivative: Derivative) -> Result<f64> {
    if matches!(strategy, Strategy::Lst | Strategy::Lbm) {
        if strategy == Strategy::Lbm {
            check_lbm(pair.layout())?;
        }
        let (jets, floors) = pattern_probability_jets(pair, derivative)?;
        let terms = jets.into_iter().zip(floors).enumerate().map(|(k, (j, f))| (k as u64, 1.0, j, f));
        return Ok(accumulate_floored(terms).map_err(negative_probability)?.0);
    }
    cfi(&probability_jets(strategy, pair, derivative)?)
}

fn negative_probability(e: Error) -> Error {
    match e {
        Error::NegativeDenominator { mask, value } => Error::NegativeProbability { index: mask as usize, value },
        other => other,
    }
}

/// `(1/(d+1)^N) sum_n C(N,n) (s')^2 / (d^n + (-1)^n s)`.
pub fn cfi_dm_closed(s: Jet, n: usize, d: usize) -> f64 {
    let df = d as f64;
    let mut binom = 1.0;
    let mut total = 0.0;
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += binom * s.d1 * s.d1 / (df.powi(k as i32) + sign * s.value);
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    total / (df + 1.0).powi(n as i32)
}

/// `(s')^2 / (D + (D-1)s - s^2)` with `D = d^N`.
pub fn cfi_grm_closed(s: Jet, n: usize, d: usize) -> f64 {
    let big_d = (d as f64).powi(n as i32);
    s.d1 * s.d1 / (big_d + (big_d - 1.0) * s.value - s.value * s.value)
}

/// GHZ overlap `s = cos^2(N theta)` and its derivatives.
pub fn ghz_overlap_jet(n: usize, theta: f64) -> Jet {
    let nf = n as f64;
    let x = 2.0 * nf * theta;
    Jet { value: 0.5 * (1.0 + x.cos()), d1: -nf * x.sin(), d2: -2.0 * nf * nf * x.cos() }
}

pub fn cfi_dm_ghz_closed(n: usize, theta: f64) -> f64 {
    cfi_dm_closed(ghz_overlap_jet(n, theta), n, 2)
}

pub fn cfi_grm_ghz_closed(n: usize, theta: f64) -> f64 {
    cfi_grm_closed(ghz_overlap_jet(n, theta), n, 2)
}

/// Closed-form local-random-measurement CFI from the global overlap.
pub fn cfi_dm(pair: &EncodedPair, derivative: Derivative) -> Result<f64> {
    let s = crate::fisher::global_jet(pair, derivative)?;
    Ok(cfi_dm_closed(s, pair.layout().n_sites(), pair.layout().local_dim()))
}

pub fn cfi_grm(pair: &EncodedPair, derivative: Derivative) -> Result<f64> {
    let s = crate::fisher::global_jet(pair, derivative)?;
    Ok(cfi_grm_closed(s, pair.layout().n_sites(), pair.layout().local_dim()))
}

pub fn cfi_gst(pair: &EncodedPair, derivative: Derivative) -> Result<f64> {
    cfi_exact(Strategy::Gst, pair, derivative)
}

pub fn cfi_lst(pair: &EncodedPair, derivative: Derivative) -> Result<f64> {
    cfi_exact(Strategy::Lst, pair, derivative)
}

pub fn cfi_lbm(pair: &EncodedPair, derivative: Derivative) -> Result<f64> {
    cfi_exact(Strategy::Lbm, pair, derivative)
}
