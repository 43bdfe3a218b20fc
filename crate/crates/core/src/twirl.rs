//! SWAP-overlap coefficients, analytic LUI/GUI states and Monte-Carlo twirl oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::states::{EncodedPair, EncodingMode};
use crate::tensor::{
    apply_slot_op, haar_unitary, swap_index, BitMask, CMatrix, CVector, DensityOperator, QuditLayout, SlotSplit,
    UnitaryMatrix, C64, ONE,
};

const IMAG_TOL: f64 = 1e-10;
const RANGE_TOL: f64 = 1e-10;
const MC_BATCH: usize = 256;

/// Value and first two `theta` derivatives of a scalar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Self { value, d1: 0.0, d2: 0.0 }
    }
}

/// The `2^N` coefficients `c_a = Tr(S_a P_theta)` describing a two-copy LUI state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LuiState {
    #[serde(skip)]
    layout: QuditLayout,
    coeffs: Vec<f64>,
    mode: EncodingMode,
    theta: f64,
}

impl LuiState {
    /// Checks `c_0 = 1` and `c_a` in `[0, 1]`, both within `1e-10`.
    pub fn new(layout: QuditLayout, coeffs: Vec<f64>, mode: EncodingMode, theta: f64) -> Result<Self> {
        let layout = layout.single_copy();
        let expected = 1usize << layout.n_sites();
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: coeffs.len() });
        }
        if (coeffs[0] - 1.0).abs() > RANGE_TOL {
            return Err(Error::Config(format!("c_0 must be 1, got {}", coeffs[0])));
        }
        if let Some((a, c)) =
            coeffs.iter().enumerate().find(|(_, c)| !c.is_finite() || **c < -RANGE_TOL || **c > 1.0 + RANGE_TOL)
        {
            return Err(Error::Config(format!("coefficient c_{a} = {c} outside [0, 1]")));
        }
        Ok(Self { layout, coeffs, mode, theta })
    }

    pub fn layout(&self) -> QuditLayout {
        self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, a: BitMask) -> f64 {
        self.coeffs[a.0 as usize]
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Two-copy GUI state, fixed by the single overlap `s = Tr(S P_theta)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GuiState {
    #[serde(skip)]
    layout: QuditLayout,
    s_global: f64,
    theta: f64,
}

impl GuiState {
    pub fn new(layout: QuditLayout, s_global: f64, theta: f64) -> Result<Self> {
        if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&s_global) {
            return Err(Error::Config(format!("global overlap {s_global} outside [0, 1]")));
        }
        Ok(Self { layout: layout.single_copy(), s_global, theta })
    }

    pub fn layout(&self) -> QuditLayout {
        self.layout
    }

    pub fn s_global(&self) -> f64 {
        self.s_global
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

fn real_trace(value: C64) -> Result<f64> {
    if value.im.abs() > IMAG_TOL {
        return Err(Error::ComplexTrace(value.im));
    }
    Ok(value.re)
}

/// `Tr(A B)` without forming the product.
fn trace_prod(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Tr(rho_{theta,a} rho_{-theta,a})` for the reductions onto the sites in `a`.
pub fn overlap_coefficient(pair: &EncodedPair, a: BitMask) -> Result<f64> {
    let layout = pair.layout();
    if !a.is_subset_of(layout.all_sites()) {
        return Err(Error::InvalidLayout(format!("mask {a} exceeds {} sites", layout.n_sites())));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let split = SlotSplit::new(layout, a)?;
    let mp = split.reshape(pair.psi_plus.amplitudes());
    let mm = split.reshape(pair.psi_minus.amplitudes());
    real_trace(trace_prod(&(&mp * mp.adjoint()), &(&mm * mm.adjoint())))
}

pub fn lui_coefficients(pair: &EncodedPair) -> Result<LuiState> {
    let layout = pair.layout();
    let coeffs = BitMask::all(layout.n_sites()).map(|a| overlap_coefficient(pair, a)).collect::<Result<Vec<_>>>()?;
    LuiState::new(layout, coeffs, pair.mode, pair.theta)
}

/// `psi`, `d psi/d theta` and `d^2 psi/d theta^2` for one encoded copy.
struct CopyJet {
    v: CVector,
    d1: CVector,
    d2: CVector,
}

fn copy_jets(pair: &EncodedPair) -> (CopyJet, CopyJet) {
    let h = &pair.hamiltonian;
    let jet = |psi: &CVector, sign: f64| {
        let hpsi = h.apply(psi);
        let h2psi = h.apply(&hpsi);
        CopyJet { v: psi.clone(), d1: &hpsi * C64::new(0.0, -sign), d2: -h2psi }
    };
    let plus = jet(pair.psi_plus.amplitudes(), 1.0);
    let minus_sign = match pair.mode {
        EncodingMode::Identical => 1.0,
        EncodingMode::Reversed => -1.0,
    };
    let minus = jet(pair.psi_minus.amplitudes(), minus_sign);
    (plus, minus)
}

/// Reduced operator of one copy and its first two derivatives.
fn reduced_jet(split: &SlotSplit, c: &CopyJet) -> [CMatrix; 3] {
    let m0 = split.reshape(&c.v);
    let m1 = split.reshape(&c.d1);
    let m2 = split.reshape(&c.d2);
    let s0 = &m0 * m0.adjoint();
    let s1 = &m1 * m0.adjoint() + &m0 * m1.adjoint();
    let s2 = &m2 * m0.adjoint() + (&m1 * m1.adjoint()) * C64::new(2.0, 0.0) + &m0 * m2.adjoint();
    [s0, s1, s2]
}

/// Analytic `theta` jets of every coefficient `c_a`, from `d psi = -i H psi`
/// on copy A and `d psi = +-i H psi` on copy B.
pub fn lui_coefficient_jets(pair: &EncodedPair) -> Result<Vec<Jet>> {
    let masks: Vec<BitMask> = BitMask::all(pair.layout().n_sites()).collect();
    coefficient_jets(pair, &masks)
}

/// Analytic jets of `c_a` for the listed masks only.
pub fn coefficient_jets(pair: &EncodedPair, masks: &[BitMask]) -> Result<Vec<Jet>> {
    let layout = pair.layout();
    let (plus, minus) = copy_jets(pair);
    masks
        .iter()
        .map(|&a| {
            if a.is_empty() {
                return Ok(Jet::constant(1.0));
            }
            let split = SlotSplit::new(layout, a)?;
            let [p0, p1, p2] = reduced_jet(&split, &plus);
            let [q0, q1, q2] = reduced_jet(&split, &minus);
            Ok(Jet {
                value: real_trace(trace_prod(&p0, &q0))?,
                d1: real_trace(trace_prod(&p1, &q0) + trace_prod(&p0, &q1))?,
                d2: real_trace(trace_prod(&p2, &q0) + trace_prod(&p1, &q1) * 2.0 + trace_prod(&p0, &q2))?,
            })
        })
        .collect()
}

/// Analytic jets of `u_b = 2^N ||Pi_b Psi||^2`, where `Psi` is the joint
/// two-copy state and `Pi_b` projects site `i` onto the symmetric (`b_i = 0`)
/// or antisymmetric (`b_i = 1`) subspace of its two copies. Equals the Walsh
/// transform of `c_a` without the cancellation error near its zeros.
pub fn projected_pattern_jets(pair: &EncodedPair, patterns: &[BitMask]) -> Result<Vec<Jet>> {
    let layout = pair.layout().doubled()?;
    let (p, q) = copy_jets(pair);
    let psi0 = q.v.kronecker(&p.v);
    let psi1 = q.d1.kronecker(&p.v) + q.v.kronecker(&p.d1);
    let psi2 = q.d2.kronecker(&p.v) + q.d1.kronecker(&p.d1) * C64::new(2.0, 0.0) + q.v.kronecker(&p.d2);
    let scale = 2f64.powi(layout.n_sites() as i32);
    Ok(patterns
        .iter()
        .map(|&b| {
            let v0 = project_pattern(&psi0, b, layout);
            let v1 = project_pattern(&psi1, b, layout);
            let v2 = project_pattern(&psi2, b, layout);
            Jet {
                value: scale * v0.norm_squared(),
                d1: scale * 2.0 * v0.dotc(&v1).re,
                d2: scale * 2.0 * (v1.norm_squared() + v0.dotc(&v2).re),
            }
        })
        .collect())
}

fn project_pattern(psi: &CVector, b: BitMask, layout: QuditLayout) -> CVector {
    let mut v = psi.clone();
    for i in 0..layout.n_sites() {
        let sign = if b.contains(i) { -0.5 } else { 0.5 };
        let prev = v.clone();
        for x in 0..v.len() {
            v[x] = prev[x] * 0.5 + prev[swap_index(x, BitMask::single(i), layout)] * sign;
        }
    }
    v
}

/// Analytic jet of the global overlap `|<psi_plus|psi_minus>|^2`.
pub fn global_overlap_jet(pair: &EncodedPair) -> Jet {
    let (p, q) = copy_jets(pair);
    let z = p.v.dotc(&q.v);
    let z1 = p.d1.dotc(&q.v) + p.v.dotc(&q.d1);
    let z2 = p.d2.dotc(&q.v) + p.d1.dotc(&q.d1) * 2.0 + p.v.dotc(&q.d2);
    Jet { value: z.norm_sqr(), d1: 2.0 * (z.conj() * z1).re, d2: 2.0 * (z1.norm_sqr() + (z.conj() * z2).re) }
}

/// Dense LUI operator `(1/(d^2-1))^N sum_a c_a (x)_{a_i=0} A_i (x)_{a_i=1} B_i`
/// with `A = I - S/d` and `B = S - I/d`.
pub fn lui_density(lui: &LuiState) -> Result<DensityOperator> {
    let layout = lui.layout.doubled()?;
    let n = layout.n_sites();
    let d = layout.local_dim() as f64;
    let dim = layout.dim();
    let norm = (d * d - 1.0).powi(n as i32).recip();
    // Expanding every site factor in {I, S} gives sum_t w_t S_t.
    let mut m = CMatrix::zeros(dim, dim);
    for t in BitMask::all(n) {
        let w: f64 =
            lui.coeffs.iter().enumerate().map(|(a, c)| c * (-1.0 / d).powi((a as u64 ^ t.0).count_ones() as i32)).sum();
        if w == 0.0 {
            continue;
        }
        for x in 0..dim {
            m[(swap_index(x, t, layout), x)] += C64::new(norm * w, 0.0);
        }
    }
    DensityOperator::new(layout, m)
}

pub fn gui_state(pair: &EncodedPair) -> Result<GuiState> {
    let s = pair.psi_plus.inner(&pair.psi_minus).norm_sqr();
    GuiState::new(pair.layout(), s, pair.theta)
}

/// `(A + s B)/(D^2 - 1)` with global `A = I - S/D`, `B = S - I/D`, `D = d^N`.
pub fn gui_density(g: &GuiState) -> Result<DensityOperator> {
    let layout = g.layout.doubled()?;
    let big_d = g.layout.dim() as f64;
    let dim = layout.dim();
    let norm = (big_d * big_d - 1.0).recip();
    let w_id = norm * (1.0 - g.s_global / big_d);
    let w_swap = norm * (g.s_global - 1.0 / big_d);
    let full = layout.all_sites();
    let mut m = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        m[(x, x)] += C64::new(w_id, 0.0);
        m[(swap_index(x, full, layout), x)] += C64::new(w_swap, 0.0);
    }
    DensityOperator::new(layout, m)
}

/// Untwirled two-copy product `|psi_plus><psi_plus| (x) |psi_minus><psi_minus|`.
pub fn pair_density(pair: &EncodedPair) -> Result<DensityOperator> {
    Ok(pair.joint_state()?.density())
}

fn hermitize(m: &CMatrix) -> CMatrix {
    let mut out = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = out.trace().re;
    out /= C64::new(tr, 0.0);
    out
}

/// Empirical average of `(x)_i U_i (x) U_i` applied to the encoded pair, with
/// independent Haar `U_i` per site shared by both copies.
pub fn mc_local_twirl<R: Rng + ?Sized>(pair: &EncodedPair, samples: usize, rng: &mut R) -> Result<DensityOperator> {
    if samples == 0 {
        return Err(Error::Config("Monte-Carlo twirl needs at least one sample".into()));
    }
    let layout = pair.layout().doubled()?;
    let n = layout.n_sites();
    let d = layout.local_dim();
    let dim = layout.dim();
    let base: u64 = rng.random();
    let n_batches = samples.div_ceil(MC_BATCH);
    let batches: Vec<(usize, CMatrix)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut brng = ChaCha8Rng::seed_from_u64(base ^ b as u64);
            let count = MC_BATCH.min(samples - b * MC_BATCH);
            let mut acc = CMatrix::zeros(dim, dim);
            for _ in 0..count {
                let mut a = pair.psi_plus.amplitudes().as_slice().to_vec();
                let mut bb = pair.psi_minus.amplitudes().as_slice().to_vec();
                for site in 0..n {
                    let u = haar_unitary(d, &mut brng);
                    apply_slot_op(&mut a, u.matrix(), site, d);
                    apply_slot_op(&mut bb, u.matrix(), site, d);
                }
                let v = CVector::from_vec(bb).kronecker(&CVector::from_vec(a));
                acc.gerc(ONE, &v, &v, ONE);
            }
            (count, hermitize(&acc))
        })
        .collect();
    let mut total = CMatrix::zeros(dim, dim);
    for (count, m) in &batches {
        total += m * C64::new(*count as f64 / samples as f64, 0.0);
    }
    Ok(DensityOperator::from_raw(layout, hermitize(&total)))
}

/// Left-multiplies every column of `m` by the local operators `ops` placed on
/// slots of dimension `d`.
fn apply_columns(m: &mut CMatrix, ops: &[(usize, &CMatrix)], d: usize) {
    let rows = m.nrows();
    for col in m.as_mut_slice().chunks_mut(rows) {
        for (slot, op) in ops {
            apply_slot_op(col, op, *slot, d);
        }
    }
}

/// `W rho W^dagger` for `W` built from `ops`.
fn conjugate(rho: &CMatrix, ops: &[(usize, &CMatrix)], d: usize) -> CMatrix {
    let mut x = rho.clone();
    apply_columns(&mut x, ops, d);
    let mut y = x.adjoint();
    apply_columns(&mut y, ops, d);
    y.adjoint()
}

/// One realization of collective RF misalignment: `(x)_i (V_i (x) V_i)`
/// acting on both copies of every site.
pub fn g_twirl_apply(rho: &DensityOperator, rotations: &[UnitaryMatrix]) -> Result<DensityOperator> {
    let layout = rho.layout();
    if layout.copies() != 2 {
        return Err(Error::Unsupported("a two-copy density operator".into()));
    }
    let n = layout.n_sites();
    let d = layout.local_dim();
    if rotations.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rotations.len() });
    }
    if let Some(bad) = rotations.iter().find(|u| u.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.dim() });
    }
    let ops: Vec<(usize, &CMatrix)> = rotations
        .iter()
        .enumerate()
        .flat_map(|(i, u)| [(layout.slot(0, i), u.matrix()), (layout.slot(1, i), u.matrix())])
        .collect();
    Ok(DensityOperator::from_raw(layout, conjugate(rho.matrix(), &ops, d)))
}

/// `(U (x) U) rho (U (x) U)^dagger` with one `d^N`-dimensional `U` per copy.
pub fn global_rotation_apply(rho: &DensityOperator, u: &UnitaryMatrix) -> Result<DensityOperator> {
    let layout = rho.layout();
    if layout.copies() != 2 {
        return Err(Error::Unsupported("a two-copy density operator".into()));
    }
    let big_d = layout.copy_dim();
    if u.dim() != big_d {
        return Err(Error::DimensionMismatch { expected: big_d, got: u.dim() });
    }
    let ops = [(0, u.matrix()), (1, u.matrix())];
    Ok(DensityOperator::from_raw(layout, conjugate(rho.matrix(), &ops, big_d)))
}
