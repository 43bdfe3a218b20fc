//! Independent oracles: commutant dimensions, trace distances and the RF-invariance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::EncodedPair;
use crate::tensor::{
    apply_slot_op, check_cap, haar_unitary, hermitian_eig, CMatrix, DensityOperator, QuditLayout, UnitaryMatrix, C64,
    ONE, ZERO,
};
use crate::twirl::{g_twirl_apply, lui_coefficients, lui_density, mc_local_twirl, LuiState};

/// Largest register the commutant solver accepts.
pub const COMMUTANT_DIM_LIMIT: usize = 256;
pub const INVARIANCE_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locality {
    /// Independent `V_i` per site, applied to all copies of that site.
    OneLocalPerSiteCollective,
    /// One `V` on the whole single-copy register, applied to every copy.
    UnrestrictedSymmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutantQuery {
    pub n_sites: usize,
    pub local_dim: usize,
    pub copies: usize,
    pub locality: Locality,
    pub probe_count: usize,
}

impl CommutantQuery {
    pub fn new(n_sites: usize, local_dim: usize, copies: usize) -> Self {
        Self { n_sites, local_dim, copies, locality: Locality::OneLocalPerSiteCollective, probe_count: 8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CommutantResult {
    /// Real dimension of the Hermitian commutant.
    pub dimension: usize,
    /// Dimension of its traceless part.
    pub traceless_dimension: usize,
    /// Result changed when four more probes were added.
    pub under_constrained: bool,
}

/// Draws one group element `(x)_i V_i^(x)k` (or `V^(x)k`) as per-slot operators.
fn draw_probe<R: Rng + ?Sized>(q: &CommutantQuery, layout: QuditLayout, rng: &mut R) -> Vec<(usize, UnitaryMatrix)> {
    match q.locality {
        Locality::OneLocalPerSiteCollective => (0..q.n_sites)
            .flat_map(|i| {
                let v = haar_unitary(q.local_dim, rng);
                (0..q.copies).map(move |c| (layout.slot(c, i), v.clone())).collect::<Vec<_>>()
            })
            .collect(),
        Locality::UnrestrictedSymmetric => {
            let v = haar_unitary(layout.copy_dim(), rng);
            (0..q.copies).map(|c| (c, v.clone())).collect()
        }
    }
}

fn probe_matrix(q: &CommutantQuery, layout: QuditLayout, ops: &[(usize, UnitaryMatrix)]) -> CMatrix {
    let dim = layout.dim();
    let slot_dim = match q.locality {
        Locality::OneLocalPerSiteCollective => q.local_dim,
        Locality::UnrestrictedSymmetric => layout.copy_dim(),
    };
    let mut m = CMatrix::identity(dim, dim);
    let rows = m.nrows();
    for col in m.as_mut_slice().chunks_mut(rows) {
        for (slot, u) in ops {
            apply_slot_op(col, u.matrix(), *slot, slot_dim);
        }
    }
    m
}

/// Nullity of `[W_p, Y] = 0` over block-diagonal `Y` in the eigenbasis of a
/// generic element of the group algebra, with and without `Tr Y = 0`.
fn solve_commutant<R: Rng + ?Sized>(
    q: &CommutantQuery,
    layout: QuditLayout,
    probes: usize,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let dim = layout.dim();
    let ws: Vec<CMatrix> = (0..probes).map(|_| probe_matrix(q, layout, &draw_probe(q, layout, rng))).collect();
    let mut h = CMatrix::zeros(dim, dim);
    for w in &ws {
        let c = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        h += w * c + w.adjoint() * c.conj();
    }
    let (evals, evecs) = hermitian_eig(&h)?;
    let scale = evals.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
    let mut block_of = vec![0usize; dim];
    for k in 1..dim {
        block_of[k] = block_of[k - 1] + usize::from(evals[k] - evals[k - 1] > CLUSTER_TOL * scale);
    }
    // Unknowns are the entries (z, y) with z and y in one block.
    let unknowns: Vec<(usize, usize)> =
        (0..dim).flat_map(|z| (0..dim).map(move |y| (z, y))).filter(|(z, y)| block_of[*z] == block_of[*y]).collect();
    let n_unk = unknowns.len();
    let mut rows: Vec<CMatrix> = Vec::with_capacity(ws.len() + 1);
    for w in &ws {
        let wp = evecs.adjoint() * w * &evecs;
        let mut a = CMatrix::zeros(dim * dim, n_unk);
        for (col, &(z, y)) in unknowns.iter().enumerate() {
            for x in 0..dim {
                a[(x * dim + y, col)] += wp[(x, z)];
            }
            for yy in 0..dim {
                a[(z * dim + yy, col)] -= wp[(y, yy)];
            }
        }
        rows.push(a);
    }
    let stacked = vstack(&rows);
    let nullity = n_unk - numerical_rank(&stacked);
    let trace_row = CMatrix::from_fn(1, n_unk, |_, c| if unknowns[c].0 == unknowns[c].1 { ONE } else { ZERO });
    let traceless = n_unk - numerical_rank(&vstack(&[stacked, trace_row]));
    Ok((nullity, traceless))
}

fn vstack(parts: &[CMatrix]) -> CMatrix {
    let cols = parts[0].ncols();
    let total: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = CMatrix::zeros(total, cols);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.nrows()).copy_from(p);
        r += p.nrows();
    }
    out
}

/// Rank with singular values below `1e-9 max(sigma_max, 1)` treated as zero.
/// The floor of 1 matches the scale of unitary constraint rows, so a system
/// that is zero up to rounding has rank 0. Tall systems are first compressed
/// to their `R` factor.
fn numerical_rank(a: &CMatrix) -> usize {
    let r = if a.nrows() > a.ncols() { a.clone().qr().r() } else { a.clone() };
    let sv = r.singular_values();
    let max = sv.iter().fold(1.0f64, |m, s| m.max(*s));
    sv.iter().filter(|s| **s >= RANK_TOL * max).count()
}

/// Dimension of the operators commuting with every collective rotation,
/// re-checked with four extra probes.
pub fn commutant_dimension<R: Rng + ?Sized>(q: &CommutantQuery, rng: &mut R) -> Result<CommutantResult> {
    if q.probe_count == 0 {
        return Err(Error::Config("probe_count must be positive".into()));
    }
    let layout = QuditLayout::new(q.n_sites, q.local_dim, q.copies)?;
    if layout.dim() > COMMUTANT_DIM_LIMIT {
        return Err(Error::DimensionCap { dim: layout.dim(), cap: COMMUTANT_DIM_LIMIT });
    }
    let (dimension, traceless_dimension) = solve_commutant(q, layout, q.probe_count, rng)?;
    let again = solve_commutant(q, layout, q.probe_count + 4, rng)?;
    Ok(CommutantResult { dimension, traceless_dimension, under_constrained: again != (dimension, traceless_dimension) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub trace_distance: f64,
    pub samples: usize,
    pub seed: u64,
}

/// `1/2 ||rho - sigma||_1`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.layout() != sigma.layout() {
        return Err(Error::DimensionMismatch { expected: rho.layout().dim(), got: sigma.layout().dim() });
    }
    let (ev, _) = hermitian_eig(&(rho.matrix() - sigma.matrix()))?;
    Ok((0.5 * ev.iter().map(|x| x.abs()).sum::<f64>()).clamp(0.0, 1.0))
}

/// How rotations are drawn for an invariance test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationModel {
    /// Independent Haar `V_i` per site.
    PerSite,
    /// One Haar `V` repeated on every site.
    Uniform,
}

/// Largest trace distance between `rho` and its image under `trials`
/// collective rotations, trial `t` seeded with `seed ^ t`.
pub fn rotation_invariance(
    rho: &DensityOperator,
    trials: usize,
    seed: u64,
    model: RotationModel,
) -> Result<DistanceReport> {
    let layout = rho.layout();
    let d = layout.local_dim();
    let worst = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t as u64);
            let rots: Vec<UnitaryMatrix> = match model {
                RotationModel::PerSite => (0..layout.n_sites()).map(|_| haar_unitary(d, &mut rng)).collect(),
                RotationModel::Uniform => vec![haar_unitary(d, &mut rng); layout.n_sites()],
            };
            trace_distance(&g_twirl_apply(rho, &rots)?, rho)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(DistanceReport { trace_distance: worst, samples: trials, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub distance: DistanceReport,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Checks that the assembled LUI state is a valid density operator and a
/// fixed point of random per-site collective rotations.
pub fn invariance_suite(lui: &LuiState, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let rho = lui_density(lui)?;
    let min_eigenvalue = rho.eigenvalues()?.first().copied().unwrap_or(0.0);
    let distance = rotation_invariance(&rho, trials, seed, RotationModel::PerSite)?;
    let passed = distance.trace_distance <= INVARIANCE_TOL && min_eigenvalue >= -INVARIANCE_TOL;
    Ok(InvarianceReport { distance, min_eigenvalue, passed })
}

/// Trace distance between the Monte-Carlo twirl and the analytic LUI state
/// for each sample count; every entry uses the same `seed`.
pub fn mc_convergence(pair: &EncodedPair, sample_schedule: &[usize], seed: u64) -> Result<Vec<DistanceReport>> {
    check_cap(pair.layout().doubled()?.dim())?;
    let exact = lui_density(&lui_coefficients(pair)?)?;
    sample_schedule
        .iter()
        .map(|&samples| {
            let mc = mc_local_twirl(pair, samples, &mut ChaCha8Rng::seed_from_u64(seed))?;
            Ok(DistanceReport { trace_distance: trace_distance(&mc, &exact)?, samples, seed })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{ghz_pair, EncodingMode};
    use crate::tensor::StateVector;
    use crate::twirl::{gui_density, gui_state, pair_density};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0xC0FFEE)
    }

    #[test]
    fn commutant_two_copies() {
        for (n, expect) in [(1, 2), (2, 4), (3, 8)] {
            let r = commutant_dimension(&CommutantQuery::new(n, 2, 2), &mut rng()).unwrap();
            assert_eq!(r.dimension, expect);
            assert_eq!(r.traceless_dimension, expect - 1);
            assert!(!r.under_constrained);
        }
    }

    #[test]
    fn commutant_single_copy_is_trivial() {
        for n in 1..=3 {
            let r = commutant_dimension(&CommutantQuery::new(n, 2, 1), &mut rng()).unwrap();
            assert_eq!((r.dimension, r.traceless_dimension), (1, 0));
        }
        let r = commutant_dimension(&CommutantQuery::new(1, 3, 1), &mut rng()).unwrap();
        assert_eq!((r.dimension, r.traceless_dimension), (1, 0));
    }

    #[test]
    fn commutant_qutrit_pair() {
        let r = commutant_dimension(&CommutantQuery::new(1, 3, 2), &mut rng()).unwrap();
        assert_eq!(r.dimension, 2);
    }

    #[test]
    fn commutant_global_symmetry() {
        let q = CommutantQuery { locality: Locality::UnrestrictedSymmetric, ..CommutantQuery::new(2, 2, 2) };
        assert_eq!(commutant_dimension(&q, &mut rng()).unwrap().dimension, 2);
        let q = CommutantQuery { locality: Locality::UnrestrictedSymmetric, ..CommutantQuery::new(2, 2, 1) };
        assert_eq!(commutant_dimension(&q, &mut rng()).unwrap().traceless_dimension, 0);
    }

    #[test]
    fn one_probe_is_flagged() {
        let q = CommutantQuery { probe_count: 1, ..CommutantQuery::new(2, 2, 2) };
        let r = commutant_dimension(&q, &mut rng()).unwrap();
        assert!(r.under_constrained && r.dimension > 4, "{r:?}");
    }

    #[test]
    fn commutant_rejects_large_registers() {
        assert!(commutant_dimension(&CommutantQuery::new(5, 2, 2), &mut rng()).is_err());
    }

    #[test]
    fn trace_distance_basics() {
        let l = QuditLayout::qubits(1).unwrap();
        let mut r = rng();
        let a = StateVector::random(l, &mut r).density();
        let b = StateVector::random(l, &mut r).density();
        assert!(trace_distance(&a, &a).unwrap() < 1e-15);
        let zero = StateVector::basis(l, 0).unwrap().density();
        let one = StateVector::basis(l, 1).unwrap().density();
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
        let mix = DensityOperator::new(l, (a.matrix() + b.matrix()) * C64::new(0.5, 0.0)).unwrap();
        let half = trace_distance(&a, &b).unwrap() / 2.0;
        assert!((trace_distance(&mix, &a).unwrap() - half).abs() < 1e-12);
        let two = QuditLayout::qubits(2).unwrap();
        assert!(trace_distance(&a, &DensityOperator::maximally_mixed(two)).is_err());
    }

    #[test]
    fn lui_states_are_invariant() {
        for mode in [EncodingMode::Reversed, EncodingMode::Identical] {
            for n in 1..=3 {
                let lui = lui_coefficients(&ghz_pair(n, 0.3, mode).unwrap()).unwrap();
                let rep = invariance_suite(&lui, 100, 7).unwrap();
                assert!(rep.passed, "{mode} n={n}: {rep:?}");
            }
        }
        let lui = lui_coefficients(&ghz_pair(1, 0.3, EncodingMode::Reversed).unwrap()).unwrap();
        assert_eq!(invariance_suite(&lui, 0, 7).unwrap().distance.trace_distance, 0.0);
    }

    #[test]
    fn untwirled_pair_is_not_invariant() {
        let rho = pair_density(&ghz_pair(2, 0.3, EncodingMode::Reversed).unwrap()).unwrap();
        let rep = rotation_invariance(&rho, 20, 3, RotationModel::PerSite).unwrap();
        assert!(rep.trace_distance > 0.1);
    }

    #[test]
    fn gui_state_is_uniformly_invariant() {
        let rho = gui_density(&gui_state(&ghz_pair(2, 0.4, EncodingMode::Reversed).unwrap()).unwrap()).unwrap();
        assert!(rotation_invariance(&rho, 30, 5, RotationModel::Uniform).unwrap().trace_distance <= 1e-10);
    }

    #[test]
    fn tampered_coefficients_fail_validity() {
        let l = QuditLayout::qubits(2).unwrap();
        let lui = LuiState::new(l, vec![1.0, 1.0, 1.0, 0.0], EncodingMode::Reversed, 0.0).unwrap();
        let rep = invariance_suite(&lui, 10, 1).unwrap();
        assert!(!rep.passed && rep.min_eigenvalue < -1e-3);
    }

    #[test]
    fn mc_convergence_shrinks_and_is_deterministic() {
        let pair = ghz_pair(2, 0.3, EncodingMode::Reversed).unwrap();
        let a = mc_convergence(&pair, &[100, 1000, 20_000], 0xC0FFEE).unwrap();
        assert!(a[0].trace_distance > a[1].trace_distance && a[1].trace_distance > a[2].trace_distance);
        assert!(a[2].trace_distance <= 0.03);
        let b = mc_convergence(&pair, &[100], 0xC0FFEE).unwrap();
        assert_eq!(a[0], b[0]);
    }
}
