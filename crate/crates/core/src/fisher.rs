//! Quantum Fisher information of twirled two-copy states.
//!
//! Every route reduces to `F = sum_k (x_k')^2 / x_k` over quantities that are
//! smooth in `theta`. A term whose denominator falls below the floor is a
//! double zero of a nonnegative function, so its limit is `2 x_k''`.
//!
//! On the coefficient route, `u_b` below `1e-6` are first recomputed from the
//! projected two-copy state, which resolves them down to rounding level; only
//! values that stay below `1e-24` take the limit. Without a dense two-copy
//! state (central differences, or over the cap) the floor is [`DENOM_FLOOR`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::states::{EncodedPair, EncodingMode, HamiltonianSpec};
use crate::tensor::{embed_site, pauli_z, BitMask, StateVector};
use crate::twirl::{coefficient_jets, global_overlap_jet, overlap_coefficient, projected_pattern_jets, Jet, LuiState};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DENOM_FLOOR: f64 = 1e-10;
pub(crate) const ZERO_FLOOR: f64 = 1e-24;
const REFINE_BELOW: f64 = 1e-6;
pub const EIGENVALUE_FLOOR: f64 = 1e-12;
const NEGATIVE_TOL: f64 = 1e-8;
const CURVATURE_FLOOR: f64 = 1e-9;

/// How `theta` derivatives are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub enum Derivative {
    /// Exact derivatives from `d psi/d theta = -i H psi`.
    #[default]
    Analytic,
    /// Central differences with the given step.
    Central(f64),
}

impl Derivative {
    pub fn step(self) -> f64 {
        match self {
            Derivative::Analytic => 0.0,
            Derivative::Central(h) => h,
        }
    }

    fn check(self) -> Result<()> {
        match self {
            Derivative::Central(h) if !(h > 0.0 && h.is_finite()) => {
                Err(Error::Config(format!("derivative step must be positive, got {h}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMethod {
    IeGeneral,
    ReGeneral,
    OneSite,
    MSite,
    Product,
    Ghz,
    GuiRe,
    F0,
    FromSpectrum,
}

/// Terms that needed special handling, identified by their mask.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FisherDiagnostics {
    /// `0/0` terms replaced by their limit `2 x''`.
    pub resolved: Vec<u64>,
    /// Terms with vanishing value, slope and curvature.
    pub dropped: Vec<u64>,
    /// Terms recomputed from the projected two-copy state.
    pub refined: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherResult {
    pub theta: f64,
    pub value: f64,
    pub method: FisherMethod,
    pub derivative_step: f64,
    pub diagnostics: FisherDiagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub b: BitMask,
    pub eigenvalue: f64,
    pub degeneracy: u64,
}

pub(crate) enum Term {
    Regular(f64),
    Resolved(f64),
    Dropped,
}

/// `(x')^2 / x` with the double-zero limit below `floor`.
pub(crate) fn fisher_term(x: Jet, floor: f64, key: u64) -> Result<Term> {
    if x.value < -NEGATIVE_TOL {
        return Err(Error::NegativeDenominator { mask: key, value: x.value });
    }
    if x.value.abs() >= floor {
        return Ok(Term::Regular(x.d1 * x.d1 / x.value));
    }
    if x.d2 > CURVATURE_FLOOR {
        Ok(Term::Resolved(2.0 * x.d2))
    } else {
        Ok(Term::Dropped)
    }
}

/// Weighted sum of Fisher terms with bookkeeping.
pub(crate) fn accumulate(
    terms: impl IntoIterator<Item = (u64, f64, Jet)>,
    floor: f64,
) -> Result<(f64, FisherDiagnostics)> {
    accumulate_floored(terms.into_iter().map(|(k, w, x)| (k, w, x, floor)))
}

/// As [`accumulate`] with a floor per term.
pub(crate) fn accumulate_floored(
    terms: impl IntoIterator<Item = (u64, f64, Jet, f64)>,
) -> Result<(f64, FisherDiagnostics)> {
    let mut total = 0.0;
    let mut diag = FisherDiagnostics::default();
    for (key, weight, x, floor) in terms {
        match fisher_term(x, floor, key)? {
            Term::Regular(v) => total += weight * v,
            Term::Resolved(v) => {
                total += weight * v;
                diag.resolved.push(key);
            }
            Term::Dropped => diag.dropped.push(key),
        }
    }
    Ok((total.max(0.0), diag))
}

/// In-place Walsh-Hadamard transform: `out_b = sum_a (-1)^{a.b} in_a`.
pub(crate) fn walsh(values: &mut [f64]) {
    let n = values.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (x, y) = (values[i], values[i + h]);
                values[i] = x + y;
                values[i + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Walsh transform applied to value, slope and curvature.
pub(crate) fn walsh_jets(jets: &[Jet]) -> Vec<Jet> {
    let mut v: Vec<f64> = jets.iter().map(|j| j.value).collect();
    let mut d1: Vec<f64> = jets.iter().map(|j| j.d1).collect();
    let mut d2: Vec<f64> = jets.iter().map(|j| j.d2).collect();
    walsh(&mut v);
    walsh(&mut d1);
    walsh(&mut d2);
    (0..jets.len()).map(|i| Jet { value: v[i], d1: d1[i], d2: d2[i] }).collect()
}

fn central_jet(minus: f64, mid: f64, plus: f64, h: f64) -> Jet {
    Jet { value: mid, d1: (plus - minus) / (2.0 * h), d2: (plus - 2.0 * mid + minus) / (h * h) }
}

/// Jets of `c_a` for the listed masks by the requested derivative scheme.
pub fn overlap_jets(pair: &EncodedPair, masks: &[BitMask], derivative: Derivative) -> Result<Vec<Jet>> {
    derivative.check()?;
    match derivative {
        Derivative::Analytic => coefficient_jets(pair, masks),
        Derivative::Central(h) => {
            let at = |theta: f64| -> Result<Vec<f64>> {
                let p = pair.at(theta)?;
                masks.iter().map(|&a| overlap_coefficient(&p, a)).collect()
            };
            let (m, c, p) = (at(pair.theta - h)?, at(pair.theta)?, at(pair.theta + h)?);
            Ok((0..masks.len()).map(|i| central_jet(m[i], c[i], p[i], h)).collect())
        }
    }
}

/// Eigenvalues `lambda_b = K_b u_b` of the LUI state with their degeneracies `s_b`.
pub fn lui_spectrum(lui: &LuiState) -> Vec<SpectrumEntry> {
    let layout = lui.layout();
    let n = layout.n_sites();
    let d = layout.local_dim() as f64;
    let mut u = lui.coeffs().to_vec();
    walsh(&mut u);
    u.iter()
        .enumerate()
        .map(|(b, ub)| {
            let k = (b as u64).count_ones() as i32;
            let scale = eigen_scale(n, d, k);
            SpectrumEntry {
                b: BitMask(b as u64),
                eigenvalue: scale * ub,
                degeneracy: degeneracy(n, d as u64, k as u32),
            }
        })
        .collect()
}

/// `(1/(d^2-1))^N ((d-1)/d)^(N-k) ((d+1)/d)^k`.
fn eigen_scale(n: usize, d: f64, k: i32) -> f64 {
    (d * d - 1.0).powi(n as i32).recip() * ((d - 1.0) / d).powi(n as i32 - k) * ((d + 1.0) / d).powi(k)
}

/// `[d(d+1)/2]^(N-k) [d(d-1)/2]^k`.
fn degeneracy(n: usize, d: u64, k: u32) -> u64 {
    (d * (d + 1) / 2).pow(n as u32 - k) * (d * (d - 1) / 2).pow(k)
}

/// QFI from the LUI spectrum with central differences of the eigenvalues.
/// Eigenvectors of LUI states do not depend on `theta`, so only the
/// classical part of the mixed-state formula survives.
pub fn qfi_from_spectrum<F>(spec_fn: F, theta: f64, step: f64) -> Result<FisherResult>
where
    F: Fn(f64) -> Result<Vec<SpectrumEntry>>,
{
    Derivative::Central(step).check()?;
    let (m, c, p) = (spec_fn(theta - step)?, spec_fn(theta)?, spec_fn(theta + step)?);
    let terms = c.iter().zip(&m).zip(&p).map(|((ec, em), ep)| {
        (ec.b.0, ec.degeneracy as f64, central_jet(em.eigenvalue, ec.eigenvalue, ep.eigenvalue, step))
    });
    let (value, diagnostics) = accumulate(terms.collect::<Vec<_>>(), EIGENVALUE_FLOOR)?;
    Ok(FisherResult { theta, value, method: FisherMethod::FromSpectrum, derivative_step: step, diagnostics })
}

/// Spectrum of the LUI state of `pair` re-encoded at `theta`.
pub fn pair_spectrum(pair: &EncodedPair, theta: f64) -> Result<Vec<SpectrumEntry>> {
    Ok(lui_spectrum(&crate::twirl::lui_coefficients(&pair.at(theta)?)?))
}

/// Jets of `u_b` for every pattern `b`, and which of them were refined.
pub(crate) fn pattern_jets(pair: &EncodedPair, derivative: Derivative) -> Result<(Vec<Jet>, Vec<bool>)> {
    let masks: Vec<BitMask> = BitMask::all(pair.layout().n_sites()).collect();
    let mut u = walsh_jets(&overlap_jets(pair, &masks, derivative)?);
    let mut refined = vec![false; u.len()];
    if derivative != Derivative::Analytic {
        return Ok((u, refined));
    }
    let low: Vec<BitMask> = masks.into_iter().filter(|b| u[b.0 as usize].value.abs() < REFINE_BELOW).collect();
    if low.is_empty() {
        return Ok((u, refined));
    }
    match projected_pattern_jets(pair, &low) {
        Ok(jets) => {
            for (b, j) in low.iter().zip(jets) {
                u[b.0 as usize] = j;
                refined[b.0 as usize] = true;
            }
        }
        // Too large to pair densely: keep the floor rule.
        Err(Error::DimensionCap { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok((u, refined))
}

fn qfi_general(pair: &EncodedPair, derivative: Derivative, method: FisherMethod) -> Result<FisherResult> {
    let n = pair.layout().n_sites();
    let (u, refined) = pattern_jets(pair, derivative)?;
    let weight = 0.5f64.powi(n as i32);
    let terms = u
        .into_iter()
        .zip(&refined)
        .enumerate()
        .map(|(b, (j, &r))| (b as u64, weight, j, if r { ZERO_FLOOR } else { DENOM_FLOOR }));
    let (value, mut diagnostics) = accumulate_floored(terms)?;
    diagnostics.refined = (0..refined.len() as u64).filter(|&b| refined[b as usize]).collect();
    Ok(FisherResult { theta: pair.theta, value, method, derivative_step: derivative.step(), diagnostics })
}

/// `F = (1/2^N) sum_b (u_b')^2/u_b` with `u_b = sum_a (-1)^{a.b} c_a` for a
/// reversed-encoding pair.
pub fn qfi_re_general(pair: &EncodedPair, derivative: Derivative) -> Result<FisherResult> {
    if pair.mode != EncodingMode::Reversed {
        return Err(Error::Unsupported("a reversed-encoding pair".into()));
    }
    qfi_general(pair, derivative, FisherMethod::ReGeneral)
}

/// Same sum for an identical-encoding pair, where `c_a` are reduced purities.
pub fn qfi_ie_general(pair: &EncodedPair, derivative: Derivative) -> Result<FisherResult> {
    if pair.mode != EncodingMode::Identical {
        return Err(Error::Unsupported("an identical-encoding pair".into()));
    }
    qfi_general(pair, derivative, FisherMethod::IeGeneral)
}

/// `8 Var(H)` in the probe: QFI of the untwirled two-copy pure state.
pub fn f0(psi0: &StateVector, h: &HamiltonianSpec) -> Result<f64> {
    if psi0.layout() != h.layout() {
        return Err(Error::DimensionMismatch { expected: h.layout().dim(), got: psi0.layout().dim() });
    }
    let hpsi = h.apply(psi0.amplitudes());
    let mean = psi0.amplitudes().dotc(&hpsi).re;
    let second = hpsi.norm_squared();
    Ok((8.0 * (second - mean * mean)).max(0.0))
}

/// `Tr(rho^2)` and `Tr(Z rho Z rho)` for a single encoded site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PurityTerms {
    pub purity: f64,
    pub z_overlap: f64,
}

impl PurityTerms {
    pub fn of(psi: &StateVector, site: usize) -> Result<Self> {
        let layout = psi.layout();
        if layout.local_dim() != 2 || site >= layout.n_sites() {
            return Err(Error::Unsupported("a qubit site inside the register".into()));
        }
        let z = embed_site(&pauli_z(), site, layout.n_sites())?;
        let ez = psi.amplitudes().dotc(&(&z * psi.amplitudes()));
        Ok(Self { purity: psi.norm().powi(4), z_overlap: ez.norm_sqr() })
    }

    pub fn gap(&self) -> f64 {
        self.purity - self.z_overlap
    }
}

/// `4 cos^2(theta) q / (2 - sin^2(theta) q)` with `q = Tr(rho^2 - Z rho Z rho)`.
/// Exact when the encoded site is unentangled from the rest of the probe.
pub fn qfi_one_site_closed(terms: PurityTerms, theta: f64) -> f64 {
    let q = terms.gap();
    let (s, c) = theta.sin_cos();
    4.0 * c * c * q / (2.0 - s * s * q)
}

/// Sum restricted to masks inside the Hamiltonian support, prefactor `1/2^m`.
/// Exact when the encoded block is unentangled from the unencoded block.
pub fn qfi_m_site_closed(pair: &EncodedPair, derivative: Derivative) -> Result<FisherResult> {
    if pair.mode != EncodingMode::Reversed {
        return Err(Error::Unsupported("a reversed-encoding pair".into()));
    }
    let support = pair.hamiltonian.support();
    let m = support.weight() as usize;
    let masks: Vec<BitMask> = (0..1u64 << m).map(|i| deposit(i, support)).collect();
    let u = walsh_jets(&overlap_jets(pair, &masks, derivative)?);
    let weight = 0.5f64.powi(m as i32);
    let (value, diagnostics) =
        accumulate(u.into_iter().enumerate().map(|(i, j)| (masks[i].0, weight, j)), DENOM_FLOOR)?;
    Ok(FisherResult {
        theta: pair.theta,
        value,
        method: FisherMethod::MSite,
        derivative_step: derivative.step(),
        diagnostics,
    })
}

/// Scatters the low bits of `bits` onto the set positions of `mask`.
fn deposit(bits: u64, mask: BitMask) -> BitMask {
    BitMask(mask.positions().enumerate().filter(|(k, _)| bits >> k & 1 == 1).fold(0, |acc, (_, p)| acc | 1 << p))
}

/// `4N cos^2(theta) / (1 + cos^2(theta))`.
pub fn qfi_product_closed(n: usize, theta: f64) -> f64 {
    let c2 = theta.cos().powi(2);
    4.0 * n as f64 * c2 / (1.0 + c2)
}

/// `2N^2 [1 - sin^2(N theta) / (cos^2(N theta) + 2^(N-1))]`.
pub fn qfi_ghz_closed(n: usize, theta: f64) -> f64 {
    let nf = n as f64;
    let (s, c) = (nf * theta).sin_cos();
    2.0 * nf * nf * (1.0 - s * s / (c * c + 2f64.powi(n as i32 - 1)))
}

/// Global-overlap jet by the requested scheme.
pub fn global_jet(pair: &EncodedPair, derivative: Derivative) -> Result<Jet> {
    derivative.check()?;
    match derivative {
        Derivative::Analytic => Ok(global_overlap_jet(pair)),
        Derivative::Central(h) => {
            let s = |t: f64| -> Result<f64> {
                let p = pair.at(t)?;
                Ok(p.psi_plus.inner(&p.psi_minus).norm_sqr())
            };
            Ok(central_jet(s(pair.theta - h)?, s(pair.theta)?, s(pair.theta + h)?, h))
        }
    }
}

/// `(s')^2 / (1 - s^2)` for `s = Tr(rho_theta rho_{-theta})`; as `s -> 1` the
/// limit is `-s''`.
pub fn gui_qfi_from_jet(s: Jet) -> f64 {
    let g = Jet { value: 1.0 - s.value, d1: -s.d1, d2: -s.d2 };
    match fisher_term(g, DENOM_FLOOR, 0) {
        Ok(Term::Regular(v)) | Ok(Term::Resolved(v)) => (v / (1.0 + s.value)).max(0.0),
        _ => 0.0,
    }
}

pub fn qfi_gui_re(pair: &EncodedPair, derivative: Derivative) -> Result<FisherResult> {
    if pair.mode != EncodingMode::Reversed {
        return Err(Error::Unsupported("a reversed-encoding pair".into()));
    }
    let s = global_jet(pair, derivative)?;
    let mut diagnostics = FisherDiagnostics::default();
    if 1.0 - s.value < DENOM_FLOOR {
        diagnostics.resolved.push(BitMask::full(pair.layout().n_sites()).0);
    }
    Ok(FisherResult {
        theta: pair.theta,
        value: gui_qfi_from_jet(s),
        method: FisherMethod::GuiRe,
        derivative_step: derivative.step(),
        diagnostics,
    })
}

/// `4N^2 cos^2(N theta) / (1 + cos^2(N theta))`.
pub fn qfi_gui_ghz_closed(n: usize, theta: f64) -> f64 {
    let nf = n as f64;
    let c2 = (nf * theta).cos().powi(2);
    4.0 * nf * nf * c2 / (1.0 + c2)
}
