//! Probe states, encoding Hamiltonians and two-copy encoded pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    embed_site, hermitian_deviation, hermitian_eig, pauli_z, BitMask, CMatrix, CVector, QuditLayout, StateVector, C64,
    ZERO,
};

/// How the second copy is encoded relative to the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodingMode {
    /// Both copies receive `exp(-i theta H)`.
    #[serde(rename = "IE")]
    Identical,
    /// Copy B receives the reversed encoding `exp(+i theta H)`.
    #[serde(rename = "RE")]
    Reversed,
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingMode::Identical => "IE",
            EncodingMode::Reversed => "RE",
        })
    }
}

#[derive(Clone, Debug)]
pub enum HamiltonianForm {
    /// `sum_i w_i Z_i` on qubits.
    PauliZSum { site_weights: Vec<f64> },
    /// Arbitrary Hermitian generator, stored with its eigendecomposition.
    DenseHermitian { matrix: CMatrix, eigenvalues: Vec<f64>, eigenvectors: CMatrix },
}

/// Encoding generator `H` of `exp(-i theta H)` on a single copy.
#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    layout: QuditLayout,
    form: HamiltonianForm,
    support: BitMask,
    one_local: bool,
}

impl HamiltonianSpec {
    /// `sum_i w_i Z_i`. Sites with zero weight fall outside the support.
    pub fn z_sum(layout: QuditLayout, site_weights: Vec<f64>) -> Result<Self> {
        let layout = layout.single_copy();
        if layout.local_dim() != 2 {
            return Err(Error::Unsupported("d = 2 for a Pauli-Z Hamiltonian".into()));
        }
        if site_weights.len() != layout.n_sites() {
            return Err(Error::DimensionMismatch { expected: layout.n_sites(), got: site_weights.len() });
        }
        let support =
            BitMask(site_weights.iter().enumerate().filter(|(_, w)| **w != 0.0).fold(0, |acc, (i, _)| acc | (1 << i)));
        Ok(Self { layout, form: HamiltonianForm::PauliZSum { site_weights }, support, one_local: true })
    }

    /// The canonical `H = 1/2 sum_i Z_i`.
    pub fn half_z_sum(layout: QuditLayout) -> Result<Self> {
        Self::z_sum(layout, vec![0.5; layout.n_sites()])
    }

    /// `1/2 sum_{i in sites} Z_i`, the m-site encoding.
    pub fn half_z_on(layout: QuditLayout, sites: BitMask) -> Result<Self> {
        let weights = (0..layout.n_sites()).map(|i| if sites.contains(i) { 0.5 } else { 0.0 }).collect();
        Self::z_sum(layout, weights)
    }

    /// General Hermitian generator acting on the sites in `support`.
    pub fn dense(layout: QuditLayout, matrix: CMatrix, support: BitMask) -> Result<Self> {
        Self::dense_with_locality(layout, matrix, support, false)
    }

    /// `sum_i h_i` with each `h_i` a `d x d` Hermitian operator on site `i`.
    pub fn local_sum(layout: QuditLayout, site_terms: &[(usize, CMatrix)]) -> Result<Self> {
        let layout = layout.single_copy();
        let dim = layout.dim();
        let mut total = CMatrix::zeros(dim, dim);
        let mut support = BitMask::EMPTY;
        for (site, op) in site_terms {
            if *site >= layout.n_sites() || op.nrows() != layout.local_dim() {
                return Err(Error::InvalidLayout(format!("bad local term on site {site}")));
            }
            total += embed_site(op, *site, layout.n_sites())?;
            support = BitMask(support.0 | (1 << site));
        }
        Self::dense_with_locality(layout, total, support, true)
    }

    fn dense_with_locality(layout: QuditLayout, matrix: CMatrix, support: BitMask, one_local: bool) -> Result<Self> {
        let layout = layout.single_copy();
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), got: matrix.nrows() });
        }
        let dev = hermitian_deviation(&matrix);
        if dev > 1e-12 {
            return Err(Error::NotHermitian(dev));
        }
        let (eigenvalues, eigenvectors) = hermitian_eig(&matrix)?;
        Ok(Self {
            layout,
            form: HamiltonianForm::DenseHermitian { matrix, eigenvalues, eigenvectors },
            support,
            one_local,
        })
    }

    pub fn layout(&self) -> QuditLayout {
        self.layout
    }

    pub fn form(&self) -> &HamiltonianForm {
        &self.form
    }

    /// Sites carrying a nonzero term.
    pub fn support(&self) -> BitMask {
        self.support
    }

    /// True when `H` is a sum of single-site terms.
    pub fn is_one_local(&self) -> bool {
        self.one_local
    }

    /// Dense rendering of `H`.
    pub fn matrix(&self) -> CMatrix {
        match &self.form {
            HamiltonianForm::PauliZSum { site_weights } => {
                let dim = self.layout.dim();
                CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::new(z_energy(site_weights, i), 0.0) } else { ZERO })
            }
            HamiltonianForm::DenseHermitian { matrix, .. } => matrix.clone(),
        }
    }

    /// `H |psi>` as raw amplitudes.
    pub fn apply(&self, psi: &CVector) -> CVector {
        match &self.form {
            HamiltonianForm::PauliZSum { site_weights } => {
                CVector::from_iterator(psi.len(), psi.iter().enumerate().map(|(x, a)| a * z_energy(site_weights, x)))
            }
            HamiltonianForm::DenseHermitian { matrix, .. } => matrix * psi,
        }
    }

    /// Pauli-Z weights when the generator is a Z sum.
    pub fn z_weights(&self) -> Option<&[f64]> {
        match &self.form {
            HamiltonianForm::PauliZSum { site_weights } => Some(site_weights),
            HamiltonianForm::DenseHermitian { .. } => None,
        }
    }
}

/// `sum_i w_i z_i` for basis index `x`, with `z_i = +1` on `|0>`.
fn z_energy(weights: &[f64], x: usize) -> f64 {
    weights.iter().enumerate().map(|(i, w)| if (x >> i) & 1 == 0 { *w } else { -*w }).sum()
}

/// `(|0...0> + |1...1>)/sqrt(2)` on `n` qubits.
pub fn ghz_state(n: usize, d: usize) -> Result<StateVector> {
    if d != 2 {
        return Err(Error::Unsupported("d = 2 for the GHZ probe".into()));
    }
    let layout = QuditLayout::new(n, 2, 1)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = CVector::zeros(layout.dim());
    amps[0] = C64::new(s, 0.0);
    amps[layout.dim() - 1] += C64::new(s, 0.0);
    StateVector::normalized(layout, amps)
}

/// `|+>^N`.
pub fn product_plus_state(n: usize) -> Result<StateVector> {
    let layout = QuditLayout::qubits(n)?;
    let amp = C64::new((layout.dim() as f64).sqrt().recip(), 0.0);
    StateVector::new(layout, CVector::from_element(layout.dim(), amp))
}

/// `exp(-i theta H) |psi>`.
pub fn evolve(psi: &StateVector, h: &HamiltonianSpec, theta: f64) -> Result<StateVector> {
    let layout = psi.layout();
    if layout != h.layout {
        return Err(Error::DimensionMismatch { expected: h.layout.dim(), got: layout.dim() });
    }
    let amps = psi.amplitudes();
    let out = match &h.form {
        HamiltonianForm::PauliZSum { site_weights } => CVector::from_iterator(
            amps.len(),
            amps.iter().enumerate().map(|(x, a)| a * C64::from_polar(1.0, -theta * z_energy(site_weights, x))),
        ),
        HamiltonianForm::DenseHermitian { eigenvalues, eigenvectors, .. } => {
            let mut coeffs = eigenvectors.adjoint() * amps;
            for (c, e) in coeffs.iter_mut().zip(eigenvalues) {
                *c *= C64::from_polar(1.0, -theta * e);
            }
            eigenvectors * coeffs
        }
    };
    Ok(StateVector::from_raw(layout, out))
}

/// Per-site phase encoding `exp(-(i/2) sum_j theta_j Z_j)`.
pub fn distributed_encode(psi: &StateVector, thetas: &[f64]) -> Result<StateVector> {
    let layout = psi.layout();
    if layout.local_dim() != 2 || layout.copies() != 1 {
        return Err(Error::Unsupported("a single-copy qubit register".into()));
    }
    if thetas.len() != layout.n_sites() {
        return Err(Error::DimensionMismatch { expected: layout.n_sites(), got: thetas.len() });
    }
    let h = HamiltonianSpec::z_sum(layout, thetas.iter().map(|t| 0.5 * t).collect())?;
    evolve(psi, &h, 1.0)
}

/// Two-copy encoded product `rho_theta (x) rho_{+-theta}`, held as pure states.
#[derive(Clone, Debug)]
pub struct EncodedPair {
    pub psi_plus: StateVector,
    pub psi_minus: StateVector,
    pub mode: EncodingMode,
    pub theta: f64,
    pub hamiltonian: HamiltonianSpec,
    pub initial: StateVector,
}

impl EncodedPair {
    pub fn layout(&self) -> QuditLayout {
        self.initial.layout()
    }

    /// The same probe and generator encoded at another angle.
    pub fn at(&self, theta: f64) -> Result<EncodedPair> {
        make_pair(&self.initial, &self.hamiltonian, theta, self.mode)
    }

    /// Full two-copy state `|psi_plus>_A |psi_minus>_B`.
    pub fn joint_state(&self) -> Result<StateVector> {
        self.psi_plus.pair_with(&self.psi_minus)
    }
}

pub fn make_pair(psi0: &StateVector, h: &HamiltonianSpec, theta: f64, mode: EncodingMode) -> Result<EncodedPair> {
    if psi0.layout().copies() != 1 {
        return Err(Error::InvalidLayout("probe must be a single-copy state".into()));
    }
    let psi_plus = evolve(psi0, h, theta)?;
    let psi_minus = match mode {
        EncodingMode::Identical => psi_plus.clone(),
        EncodingMode::Reversed => evolve(psi0, h, -theta)?,
    };
    Ok(EncodedPair { psi_plus, psi_minus, mode, theta, hamiltonian: h.clone(), initial: psi0.clone() })
}

/// GHZ probe with `H = 1/2 sum Z`.
pub fn ghz_pair(n: usize, theta: f64, mode: EncodingMode) -> Result<EncodedPair> {
    let psi = ghz_state(n, 2)?;
    let h = HamiltonianSpec::half_z_sum(psi.layout())?;
    make_pair(&psi, &h, theta, mode)
}

/// Product `|+>^N` probe with `H = 1/2 sum Z`.
pub fn product_pair(n: usize, theta: f64, mode: EncodingMode) -> Result<EncodedPair> {
    let psi = product_plus_state(n)?;
    let h = HamiltonianSpec::half_z_sum(psi.layout())?;
    make_pair(&psi, &h, theta, mode)
}

/// A single Pauli-Z term on `site`, convenient for building local sums.
pub fn z_term(site: usize) -> (usize, CMatrix) {
    (site, pauli_z())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{kron, pauli_x, pauli_y};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ghz_amplitudes() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let g1 = ghz_state(1, 2).unwrap();
        assert!((g1.amplitudes()[0].re - s).abs() < 1e-15 && (g1.amplitudes()[1].re - s).abs() < 1e-15);
        let g3 = ghz_state(3, 2).unwrap();
        assert!((g3.amplitudes()[0].re - s).abs() < 1e-15);
        assert!((g3.amplitudes()[7].re - s).abs() < 1e-15);
        assert!(g3.amplitudes().iter().skip(1).take(6).all(|a| a.norm() == 0.0));
        assert!(ghz_state(2, 3).is_err());
    }

    #[test]
    fn ghz_reduction_is_maximally_mixed() {
        let red = ghz_state(2, 2).unwrap().reduced(BitMask(0b01)).unwrap();
        assert!((red - CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn product_state_is_uniform_and_unentangled() {
        let p1 = product_plus_state(1).unwrap();
        assert!((p1.amplitudes()[1].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let p2 = product_plus_state(2).unwrap();
        assert!(p2.amplitudes().iter().all(|a| (a.re - 0.5).abs() < 1e-15));
        let p3 = product_plus_state(3).unwrap();
        for site in 0..3 {
            let red = p3.reduced(BitMask::single(site)).unwrap();
            assert!(((&red * &red).trace().re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn evolve_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = QuditLayout::qubits(3).unwrap();
        let psi = StateVector::random(l, &mut rng);
        let h = HamiltonianSpec::half_z_sum(l).unwrap();
        assert_eq!(evolve(&psi, &h, 0.0).unwrap(), psi);
        let back = evolve(&evolve(&psi, &h, 0.7).unwrap(), &h, -0.7).unwrap();
        assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn ghz_picks_up_relative_phase() {
        let n = 3;
        let theta = 0.37;
        let psi = ghz_state(n, 2).unwrap();
        let h = HamiltonianSpec::half_z_sum(psi.layout()).unwrap();
        let out = evolve(&psi, &h, theta).unwrap();
        let a0 = out.amplitudes()[0];
        let a1 = out.amplitudes()[(1 << n) - 1];
        let rel = a1 / a0;
        assert!((rel - C64::from_polar(1.0, n as f64 * theta)).norm() < 1e-14);
        let global = a0 / C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        assert!((global - C64::from_polar(1.0, -(n as f64) * theta / 2.0)).norm() < 1e-14);
    }

    #[test]
    fn z_sum_and_dense_rendering_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=4 {
            let l = QuditLayout::qubits(n).unwrap();
            let weights: Vec<f64> = (0..n).map(|i| 0.3 + 0.2 * i as f64).collect();
            let hz = HamiltonianSpec::z_sum(l, weights).unwrap();
            let hd = HamiltonianSpec::dense(l, hz.matrix(), hz.support()).unwrap();
            let psi = StateVector::random(l, &mut rng);
            for theta in [0.1, 0.9, 2.3] {
                let a = evolve(&psi, &hz, theta).unwrap();
                let b = evolve(&psi, &hd, theta).unwrap();
                assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn evolution_preserves_norm_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = QuditLayout::qubits(3).unwrap();
        let x = pauli_x();
        let y = pauli_y();
        let h =
            HamiltonianSpec::dense(l, crate::tensor::site_kron(&[x, y.clone(), y]).unwrap(), l.all_sites()).unwrap();
        let psi = StateVector::random(l, &mut rng);
        for k in 0..100 {
            let theta = std::f64::consts::PI * k as f64 / 99.0;
            assert!((evolve(&psi, &h, theta).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = QuditLayout::qubits(2).unwrap();
        let psi = StateVector::random(l, &mut rng);
        let h = HamiltonianSpec::half_z_sum(l).unwrap();
        let re0 = make_pair(&psi, &h, 0.0, EncodingMode::Reversed).unwrap();
        assert_eq!(re0.psi_plus, psi);
        assert_eq!(re0.psi_minus, psi);
        let ie = make_pair(&psi, &h, 0.4, EncodingMode::Identical).unwrap();
        assert!((ie.psi_plus.inner(&ie.psi_minus) - C64::new(1.0, 0.0)).norm() < 1e-14);
        for n in 1..=4 {
            let pair = ghz_pair(n, 0.3, EncodingMode::Reversed).unwrap();
            let ov = pair.psi_plus.inner(&pair.psi_minus).norm_sqr();
            assert!((ov - (n as f64 * 0.3).cos().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn reversed_overlap_is_one_at_zero_for_dense_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let l = QuditLayout::qubits(2).unwrap();
        let g = CMatrix::from_fn(4, 4, |_, _| C64::new(rand::Rng::random::<f64>(&mut rng), 0.3));
        let h = HamiltonianSpec::dense(l, &g + g.adjoint(), l.all_sites()).unwrap();
        let pair = make_pair(&StateVector::random(l, &mut rng), &h, 0.0, EncodingMode::Reversed).unwrap();
        assert!((pair.psi_plus.inner(&pair.psi_minus).norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn distributed_encoding() {
        let g2 = ghz_state(2, 2).unwrap();
        assert_eq!(distributed_encode(&g2, &[0.0, 0.0]).unwrap(), g2);
        let out = distributed_encode(&g2, &[0.1, 0.3]).unwrap();
        let rel = (out.amplitudes()[3] / out.amplitudes()[0]).arg();
        assert!((rel - 0.4).abs() < 1e-14);
        let g3 = ghz_state(3, 2).unwrap();
        let a = distributed_encode(&g3, &[0.1, 0.5, -0.2]).unwrap();
        let b = distributed_encode(&g3, &[0.5, -0.2, 0.1]).unwrap();
        assert!((a.amplitudes() - b.amplitudes()).norm() < 1e-15);
        assert!(distributed_encode(&g3, &[0.1]).is_err());
    }

    #[test]
    fn local_sum_embeds_terms() {
        let l = QuditLayout::qubits(2).unwrap();
        let h = HamiltonianSpec::local_sum(l, &[z_term(0), z_term(1)]).unwrap();
        assert!(h.is_one_local());
        assert_eq!(h.support(), BitMask(0b11));
        let expect = HamiltonianSpec::z_sum(l, vec![1.0, 1.0]).unwrap().matrix();
        assert!((h.matrix() - expect).norm() < 1e-15);
        let zz = kron(&pauli_z(), &pauli_z()).unwrap();
        assert!(!HamiltonianSpec::dense(l, zz, l.all_sites()).unwrap().is_one_local());
    }
}
