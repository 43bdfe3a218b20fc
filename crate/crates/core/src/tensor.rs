//! Dense complex linear algebra over multi-qudit spaces.
//!
//! Every full-space index is copy-major: the `N` sites of copy A occupy the
//! least significant base-`d` digits (site 0 lowest), followed by the `N`
//! sites of copy B. A two-copy product `|a>|b>` therefore has amplitude
//! `a[x_a] * b[x_b]` at index `x_a + d^N * x_b`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default cap on the dense dimension `d^(k N)`.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Environment variable overriding [`DEFAULT_DIM_CAP`].
pub const DIM_CAP_ENV: &str = "FF_DIM_CAP";

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const EIG_HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// The active dense-dimension cap.
pub fn dim_cap() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_DIM_CAP)
}

pub(crate) fn check_cap(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        Err(Error::DimensionCap { dim, cap })
    } else {
        Ok(())
    }
}

/// Site count, local dimension and copy count of a network register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuditLayout {
    n_sites: usize,
    local_dim: usize,
    copies: usize,
}

impl QuditLayout {
    pub fn new(n_sites: usize, local_dim: usize, copies: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidLayout("at least one site is required".into()));
        }
        if n_sites > 63 {
            return Err(Error::InvalidLayout("at most 63 sites are supported".into()));
        }
        if local_dim < 2 {
            return Err(Error::InvalidLayout(format!("local dimension {local_dim} < 2")));
        }
        if !(1..=2).contains(&copies) {
            return Err(Error::InvalidLayout(format!("copy count {copies} not in {{1, 2}}")));
        }
        let layout = Self { n_sites, local_dim, copies };
        let dim = layout.checked_dim().ok_or(Error::DimensionCap { dim: usize::MAX, cap: dim_cap() })?;
        check_cap(dim)?;
        Ok(layout)
    }

    /// Single-copy layout of `n` qubits.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(n, 2, 1)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    /// Number of qudit slots, `k N`.
    pub fn n_slots(&self) -> usize {
        self.n_sites * self.copies
    }

    fn checked_dim(&self) -> Option<usize> {
        self.local_dim.checked_pow(u32::try_from(self.n_slots()).ok()?)
    }

    /// Full Hilbert-space dimension `d^(k N)`.
    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.n_slots() as u32)
    }

    /// Dimension of one copy, `d^N`.
    pub fn copy_dim(&self) -> usize {
        self.local_dim.pow(self.n_sites as u32)
    }

    pub fn single_copy(&self) -> Self {
        Self { copies: 1, ..*self }
    }

    /// The two-copy layout over the same sites.
    pub fn doubled(&self) -> Result<Self> {
        Self::new(self.n_sites, self.local_dim, 2)
    }

    /// Slot index of `site` in `copy` (0 = A, 1 = B).
    pub fn slot(&self, copy: usize, site: usize) -> usize {
        copy * self.n_sites + site
    }

    /// Mask with every site selected.
    pub fn all_sites(&self) -> BitMask {
        BitMask::full(self.n_sites)
    }
}

impl fmt::Display for QuditLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} d={} k={}", self.n_sites, self.local_dim, self.copies)
    }
}

/// Subset of sites (or slots); bit `i` set means position `i` is selected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitMask(pub u64);

impl BitMask {
    pub const EMPTY: BitMask = BitMask(0);

    pub fn full(n: usize) -> Self {
        if n >= 64 {
            BitMask(u64::MAX)
        } else {
            BitMask((1u64 << n) - 1)
        }
    }

    pub fn single(i: usize) -> Self {
        BitMask(1 << i)
    }

    pub fn from_positions(positions: &[usize]) -> Self {
        BitMask(positions.iter().fold(0, |acc, &i| acc | (1u64 << i)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// Hamming weight, read as `|a|^2` in the closed-form expressions.
    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub fn contains(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, n: usize) -> Self {
        BitMask(!self.0 & Self::full(n).0)
    }

    pub fn and(self, other: Self) -> Self {
        BitMask(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// `(-1)^(a . b)` where `a . b` is the popcount of the bitwise AND.
    pub fn parity_sign(self, other: Self) -> f64 {
        if (self.0 & other.0).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Set positions in ascending order.
    pub fn positions(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    /// All `2^n` masks over `n` positions, in numeric order.
    pub fn all(n: usize) -> impl Iterator<Item = BitMask> {
        (0..(1u64 << n)).map(BitMask)
    }

    /// All submasks of `self`, in numeric order.
    pub fn submasks(self) -> Vec<BitMask> {
        let mut out = Vec::with_capacity(1 << self.weight());
        let mut sub = 0u64;
        loop {
            out.push(BitMask(sub));
            if sub == self.0 {
                break;
            }
            sub = (sub.wrapping_sub(self.0)) & self.0;
        }
        out
    }
}

impl fmt::Display for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// Pure network state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: QuditLayout,
    amplitudes: CVector,
}

impl StateVector {
    /// Wraps amplitudes that must already be normalized within `1e-12`.
    pub fn new(layout: QuditLayout, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), got: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(layout: QuditLayout, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Self::new(layout, amplitudes / C64::new(norm, 0.0))
    }

    /// Computational basis state.
    pub fn basis(layout: QuditLayout, index: usize) -> Result<Self> {
        if index >= layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), got: index });
        }
        let mut amps = CVector::zeros(layout.dim());
        amps[index] = ONE;
        Ok(Self { layout, amplitudes: amps })
    }

    /// Haar-random pure state (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(layout: QuditLayout, rng: &mut R) -> Self {
        let amps =
            CVector::from_fn(layout.dim(), |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        Self::normalized(layout, amps).expect("gaussian vector is nonzero")
    }

    pub(crate) fn from_raw(layout: QuditLayout, amplitudes: CVector) -> Self {
        Self { layout, amplitudes }
    }

    pub fn layout(&self) -> QuditLayout {
        self.layout
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn density(&self) -> DensityOperator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator { layout: self.layout, matrix: m }
    }

    /// Two-copy product `|self>_A |other>_B`.
    pub fn pair_with(&self, other: &StateVector) -> Result<StateVector> {
        if self.layout != other.layout || self.layout.copies() != 1 {
            return Err(Error::InvalidLayout("pairing needs two single-copy states on one layout".into()));
        }
        let layout = self.layout.doubled()?;
        let amps = other.amplitudes.kronecker(&self.amplitudes);
        Ok(StateVector { layout, amplitudes: amps })
    }

    /// Reduced operator on the slots selected by `keep`, computed without
    /// materializing the full projector.
    pub fn reduced(&self, keep: BitMask) -> Result<CMatrix> {
        let split = SlotSplit::new(self.layout, keep)?;
        let m = split.reshape(&self.amplitudes);
        Ok(&m * m.adjoint())
    }
}

/// Dense operator on a [`QuditLayout`] with density-operator semantics.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    layout: QuditLayout,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity (`1e-12`) and unit trace (`1e-10`).
    pub fn new(layout: QuditLayout, matrix: CMatrix) -> Result<Self> {
        let dim = layout.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.nrows() });
        }
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Config(format!("density operator trace {tr} != 1")));
        }
        Ok(Self { layout, matrix })
    }

    pub(crate) fn from_raw(layout: QuditLayout, matrix: CMatrix) -> Self {
        Self { layout, matrix }
    }

    pub fn maximally_mixed(layout: QuditLayout) -> Self {
        let dim = layout.dim();
        let m = CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        Self { layout, matrix: m }
    }

    pub fn layout(&self) -> QuditLayout {
        self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eig(&self.matrix)?.0)
    }

    /// Full validity check: Hermitian, unit trace, eigenvalues `>= -1e-10`.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.layout, self.matrix.clone())?;
        let evs = self.eigenvalues()?;
        if let Some(&min) = evs.first() {
            if min < -1e-10 {
                return Err(Error::NegativeProbability { index: 0, value: min });
            }
        }
        Ok(())
    }

    /// `Tr(op * rho)`.
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        (op * &self.matrix).trace()
    }

    /// Reduced operator on the slots selected by `keep`.
    pub fn partial_trace(&self, keep: BitMask) -> Result<DensityOperator> {
        partial_trace(self, keep)
    }
}

/// Unitary matrix checked to `U U^dagger = I` within `1e-10`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    matrix: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// Max entry of `|U U^dagger - I|`.
pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let prod = m * m.adjoint();
    let id = CMatrix::identity(m.nrows(), m.ncols());
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max entry of `|A - A^dagger|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Standard Kronecker product; the index of `b` is least significant.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_cap(a.nrows() * b.nrows())?;
    check_cap(a.ncols() * b.ncols())?;
    Ok(a.kronecker(b))
}

/// Tensor product of per-site operators with site 0 least significant.
pub fn site_kron(ops: &[CMatrix]) -> Result<CMatrix> {
    let mut acc = CMatrix::identity(1, 1);
    for op in ops {
        acc = kron(op, &acc)?;
    }
    Ok(acc)
}

/// Embeds a single-site operator at `site` of an `n`-site register.
pub fn embed_site(op: &CMatrix, site: usize, n: usize) -> Result<CMatrix> {
    let d = op.nrows();
    let ops: Vec<CMatrix> = (0..n).map(|i| if i == site { op.clone() } else { CMatrix::identity(d, d) }).collect();
    site_kron(&ops)
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    let i = C64::new(0.0, 1.0);
    CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

/// Index bookkeeping for splitting a register into kept and traced slots.
pub(crate) struct SlotSplit {
    kept_offsets: Vec<usize>,
    traced_offsets: Vec<usize>,
}

impl SlotSplit {
    pub(crate) fn new(layout: QuditLayout, keep: BitMask) -> Result<Self> {
        let n_slots = layout.n_slots();
        if keep.is_empty() {
            return Err(Error::EmptyKeep);
        }
        if !keep.is_subset_of(BitMask::full(n_slots)) {
            return Err(Error::InvalidLayout(format!("keep mask {keep} exceeds {n_slots} slots")));
        }
        let d = layout.local_dim();
        let kept: Vec<usize> = (0..n_slots).filter(|&s| keep.contains(s)).collect();
        let traced: Vec<usize> = (0..n_slots).filter(|&s| !keep.contains(s)).collect();
        Ok(Self { kept_offsets: slot_offsets(&kept, d), traced_offsets: slot_offsets(&traced, d) })
    }

    pub(crate) fn reshape(&self, amps: &CVector) -> CMatrix {
        CMatrix::from_fn(self.kept_offsets.len(), self.traced_offsets.len(), |i, t| {
            amps[self.kept_offsets[i] + self.traced_offsets[t]]
        })
    }
}

/// Full-index offsets of every digit assignment to `slots`, first slot
/// least significant.
fn slot_offsets(slots: &[usize], d: usize) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &s in slots {
        let stride = d.pow(s as u32);
        let mut next = Vec::with_capacity(offsets.len() * d);
        for digit in 0..d {
            next.extend(offsets.iter().map(|&o| o + digit * stride));
        }
        offsets = next;
    }
    offsets
}

/// Reduced layout after keeping `keep` slots: two-copy when the same sites
/// survive in both copies, single-copy otherwise.
fn reduced_layout(layout: QuditLayout, keep: BitMask) -> Result<QuditLayout> {
    let n = layout.n_sites();
    if layout.copies() == 2 {
        let a = keep.and(BitMask::full(n));
        let b = BitMask(keep.0 >> n);
        if a == b {
            return QuditLayout::new(a.weight() as usize, layout.local_dim(), 2);
        }
    }
    QuditLayout::new(keep.weight() as usize, layout.local_dim(), 1)
}

/// Traces out every slot not selected by `keep`, preserving slot order.
pub fn partial_trace(rho: &DensityOperator, keep: BitMask) -> Result<DensityOperator> {
    let layout = rho.layout;
    let split = SlotSplit::new(layout, keep)?;
    let out_layout = reduced_layout(layout, keep)?;
    let k = split.kept_offsets.len();
    let m = &rho.matrix;
    let out = CMatrix::from_fn(k, k, |i, j| {
        let (oi, oj) = (split.kept_offsets[i], split.kept_offsets[j]);
        split.traced_offsets.iter().map(|&t| m[(oi + t, oj + t)]).sum()
    });
    Ok(DensityOperator { layout: out_layout, matrix: out })
}

/// Image of full index `x` under the local swaps selected by `a`.
pub fn swap_index(x: usize, a: BitMask, layout: QuditLayout) -> usize {
    let n = layout.n_sites();
    let d = layout.local_dim();
    let mut y = x;
    for i in a.positions().take_while(|&i| i < n) {
        let pa = d.pow(i as u32);
        let pb = d.pow((n + i) as u32);
        let da = (x / pa) % d;
        let db = (x / pb) % d;
        y = y - da * pa - db * pb + db * pa + da * pb;
    }
    y
}

/// Permutation exchanging copy-A slot `i` with copy-B slot `i` for every
/// set bit `i` of `a`.
pub fn swap_operator(a: BitMask, layout: QuditLayout) -> Result<CMatrix> {
    if layout.copies() != 2 {
        return Err(Error::Unsupported("a two-copy layout for the swap operator".into()));
    }
    if !a.is_subset_of(layout.all_sites()) {
        return Err(Error::InvalidLayout(format!("swap mask {a} exceeds {} sites", layout.n_sites())));
    }
    let dim = layout.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        m[(swap_index(x, a, layout), x)] = ONE;
    }
    Ok(m)
}

/// Applies the `d x d` operator `op` to slot `slot` of a register stored as
/// raw amplitudes, in place.
pub(crate) fn apply_slot_op(amps: &mut [C64], op: &CMatrix, slot: usize, d: usize) {
    let stride = d.pow(slot as u32);
    let block = stride * d;
    let mut tmp = vec![ZERO; d];
    for base in (0..amps.len()).step_by(block) {
        for off in 0..stride {
            let i0 = base + off;
            for (j, t) in tmp.iter_mut().enumerate() {
                *t = amps[i0 + j * stride];
            }
            for r in 0..d {
                amps[i0 + r * stride] = (0..d).map(|j| op[(r, j)] * tmp[j]).sum();
            }
        }
    }
}

/// Haar-distributed unitary on `U(d)`: Ginibre matrix, QR, and the phase
/// correction that makes `R` have a positive real diagonal.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitaryMatrix {
    assert!(d >= 1, "dimension must be positive");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal) * scale, rng.sample::<f64, _>(StandardNormal) * scale)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix { matrix: q }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching unitary of column eigenvectors.
pub fn hermitian_eig(op: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let scale = op.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(op);
    if dev > EIG_HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    let n = op.nrows();
    // Exact symmetrization keeps the solver on the Hermitian path.
    let sym = (op + op.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn unitary_exp(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eig(h)?;
    let n = vals.len();
    let phases = CMatrix::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, -t * vals[i]) } else { ZERO });
    Ok(&vecs * phases * vecs.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bell() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let layout = QuditLayout::qubits(2).unwrap();
        StateVector::new(layout, CVector::from_vec(vec![c(s), ZERO, ZERO, c(s)])).unwrap()
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2).unwrap(), CMatrix::identity(4, 4));
        let zz = kron(&pauli_z(), &pauli_z()).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| zz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn kron_trace_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CMatrix::from_fn(2, 2, |_, _| C64::new(rng.random(), rng.random()));
        let b = CMatrix::from_fn(2, 2, |_, _| C64::new(rng.random(), rng.random()));
        let k = kron(&a, &b).unwrap();
        // direct multiplication oracle
        let mut direct = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                direct += a[(i, i)] * b[(j, j)];
            }
        }
        assert!((k.trace() - direct).norm() < 1e-14);
        assert!((k.trace() - a.trace() * b.trace()).norm() < 1e-14);
    }

    #[test]
    fn kron_respects_cap() {
        let big = CMatrix::identity(128, 128);
        assert!(matches!(kron(&big, &big), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn layout_rejects_bad_shapes() {
        assert!(QuditLayout::new(0, 2, 1).is_err());
        assert!(QuditLayout::new(2, 1, 1).is_err());
        assert!(QuditLayout::new(2, 2, 3).is_err());
        assert!(matches!(QuditLayout::new(7, 2, 2), Err(Error::DimensionCap { .. })));
        assert_eq!(QuditLayout::new(6, 2, 2).unwrap().dim(), 4096);
    }

    #[test]
    fn partial_trace_of_bell_is_maximally_mixed() {
        let rho = bell().density();
        let red = rho.partial_trace(BitMask(0b01)).unwrap();
        let expect = CMatrix::identity(2, 2) * c(0.5);
        assert!((red.matrix() - expect).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_of_product_keeps_factor() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let layout = QuditLayout::qubits(2).unwrap();
        // |0> on slot 0, |+> on slot 1
        let psi = StateVector::new(layout, CVector::from_vec(vec![c(s), ZERO, c(s), ZERO])).unwrap();
        let red = psi.density().partial_trace(BitMask(0b10)).unwrap();
        let plus = CMatrix::from_element(2, 2, c(0.5));
        assert!((red.matrix() - plus).norm() < 1e-15);
        assert!((psi.reduced(BitMask(0b10)).unwrap() - red.matrix()).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_keep_all_and_empty() {
        let rho = bell().density();
        let same = rho.partial_trace(BitMask(0b11)).unwrap();
        assert_eq!(same.matrix(), rho.matrix());
        assert!(matches!(rho.partial_trace(BitMask(0)), Err(Error::EmptyKeep)));
    }

    #[test]
    fn partial_trace_of_pair_yields_two_copy_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = QuditLayout::qubits(3).unwrap();
        let p = StateVector::random(l, &mut rng).pair_with(&StateVector::random(l, &mut rng)).unwrap();
        let red = p.density().partial_trace(BitMask(0b101_101)).unwrap();
        assert_eq!(red.layout(), QuditLayout::new(2, 2, 2).unwrap());
        let red = p.density().partial_trace(BitMask(0b001_101)).unwrap();
        assert_eq!(red.layout(), QuditLayout::new(3, 2, 1).unwrap());
    }

    #[test]
    fn swap_operator_basics() {
        let layout = QuditLayout::new(2, 2, 2).unwrap();
        assert_eq!(swap_operator(BitMask(0), layout).unwrap(), CMatrix::identity(16, 16));
        let s01 = swap_operator(BitMask(0b01), layout).unwrap();
        // brute-force trace oracle: count fixed points
        let fixed = (0..16).filter(|&x| swap_index(x, BitMask(0b01), layout) == x).count();
        assert_eq!(fixed, 8);
        assert_eq!(s01.trace().re, 8.0);
        assert_eq!(&s01 * &s01, CMatrix::identity(16, 16));
        assert_eq!(s01.adjoint(), s01);
        assert!(swap_operator(BitMask(1), QuditLayout::qubits(2).unwrap()).is_err());
    }

    #[test]
    fn global_swap_exchanges_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = QuditLayout::new(2, 3, 1).unwrap();
        let psi = StateVector::random(l, &mut rng);
        let phi = StateVector::random(l, &mut rng);
        let s = swap_operator(BitMask::full(2), l.doubled().unwrap()).unwrap();
        let swapped = &s * psi.pair_with(&phi).unwrap().amplitudes();
        let expect = phi.pair_with(&psi).unwrap();
        assert!((swapped - expect.amplitudes()).norm() < 1e-14);
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_unitary(3, &mut rng);
            assert!(unitarity_deviation(u.matrix()) < 1e-10);
            let mut rng2 = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(u, haar_unitary(3, &mut rng2));
        }
    }

    #[test]
    fn haar_first_moment_depolarizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 3;
        let mut rho = CMatrix::zeros(d, d);
        rho[(0, 0)] = ONE;
        let samples = 10_000;
        let mut acc = CMatrix::zeros(d, d);
        for _ in 0..samples {
            let u = haar_unitary(d, &mut rng);
            acc += u.matrix() * &rho * u.matrix().adjoint();
        }
        acc /= c(samples as f64);
        let diff = acc - CMatrix::identity(d, d) * c(1.0 / d as f64);
        let (vals, _) = hermitian_eig(&diff).unwrap();
        let td = 0.5 * vals.iter().map(|v| v.abs()).sum::<f64>();
        assert!(td < 0.05, "trace distance {td}");
    }

    #[test]
    fn haar_second_moment_of_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| haar_unitary(2, &mut rng).matrix()[(0, 0)].norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn hermitian_eig_basics() {
        let (v, _) = hermitian_eig(&pauli_z()).unwrap();
        assert_eq!(v, vec![-1.0, 1.0]);
        let (v, _) = hermitian_eig(&(CMatrix::identity(2, 2) * c(0.5))).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        let not_h = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(hermitian_eig(&not_h), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn hermitian_eig_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = CMatrix::from_fn(12, 12, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let h = &g + g.adjoint();
        let (vals, vecs) = hermitian_eig(&h).unwrap();
        let sum: f64 = vals.iter().sum();
        assert!((sum - h.trace().re).abs() < 1e-10);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let lam = CMatrix::from_diagonal(&CVector::from_iterator(12, vals.iter().map(|&v| c(v))));
        let rec = &vecs * lam * vecs.adjoint();
        assert!((rec - &h).norm() <= 1e-9 * h.norm());
    }

    #[test]
    fn submask_enumeration() {
        let subs = BitMask(0b1010).submasks();
        assert_eq!(subs, vec![BitMask(0), BitMask(0b10), BitMask(0b1000), BitMask(0b1010)]);
        assert_eq!(BitMask(0b011).complement(3), BitMask(0b100));
        assert_eq!(BitMask(0b011).parity_sign(BitMask(0b001)), -1.0);
    }
}
