//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use lui_metrology::cli::random_local_pair;
use lui_metrology::fisher::{
    lui_spectrum, pair_spectrum, qfi_from_spectrum, qfi_ghz_closed, qfi_ie_general, qfi_product_closed, qfi_re_general,
    Derivative, DEFAULT_STEP,
};
use lui_metrology::measure::{
    cfi_dm, cfi_dm_ghz_closed, cfi_grm, cfi_grm_ghz_closed, cfi_lbm, cfi_lst, estimate_repeated, SearchWindow, Strategy,
};
use lui_metrology::states::{ghz_pair, product_pair};
use lui_metrology::twirl::{lui_coefficients, lui_density};
use lui_metrology::verify::{commutant_dimension, invariance_suite, mc_convergence, CommutantQuery};
use lui_metrology::{EncodedPair, EncodingMode, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0xC0FFEE;
const AN: Derivative = Derivative::Analytic;

type Outcome = Result<(bool, String)>;

/// Name, check, runtime budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// 50 interior points of `(0, pi/2)`.
fn open_grid() -> Vec<f64> {
    (0..50).map(|i| (i as f64 + 0.5) * FRAC_PI_2 / 50.0).collect()
}

fn probe(ghz: bool, n: usize, theta: f64, mode: EncodingMode) -> Result<EncodedPair> {
    if ghz {
        ghz_pair(n, theta, mode)
    } else {
        product_pair(n, theta, mode)
    }
}

fn c1_heisenberg_limit() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=4 {
        let f = qfi_re_general(&ghz_pair(n, 1e-4, EncodingMode::Reversed)?, AN)?.value;
        worst = worst.max(rel(f, 2.0 * (n * n) as f64));
    }
    Ok((worst <= 1e-3, format!("max rel err vs 2N^2 = {worst:.2e}")))
}

fn c2_product_sql() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=4 {
        let f = qfi_re_general(&product_pair(n, 1e-4, EncodingMode::Reversed)?, AN)?.value;
        worst = worst.max(rel(f, 2.0 * n as f64));
    }
    Ok((worst <= 1e-3, format!("max rel err vs 2N = {worst:.2e}")))
}

fn c3_closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    for ghz in [true, false] {
        for n in 1..=4 {
            for theta in open_grid() {
                let pair = probe(ghz, n, theta, EncodingMode::Reversed)?;
                let closed = if ghz { qfi_ghz_closed(n, theta) } else { qfi_product_closed(n, theta) };
                let general = qfi_re_general(&pair, AN)?.value;
                let spectral = qfi_from_spectrum(|t| pair_spectrum(&pair, t), theta, DEFAULT_STEP)?.value;
                worst = worst.max(rel(general, closed)).max(rel(spectral, closed));
            }
        }
    }
    Ok((worst <= 1e-4, format!("max rel err over 2 probes x 4 N x 50 theta = {worst:.2e}")))
}

fn c4_no_go() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for i in 0..50 {
        let n = 1 + i % 4;
        let pair = random_local_pair(n, 0.05 + 0.03 * i as f64, EncodingMode::Identical, &mut rng)?;
        worst = worst.max(qfi_ie_general(&pair, AN)?.value.abs());
    }
    for ghz in [true, false] {
        for n in 1..=4 {
            for theta in open_grid().into_iter().step_by(5) {
                worst = worst.max(qfi_ie_general(&probe(ghz, n, theta, EncodingMode::Identical)?, AN)?.value.abs());
            }
        }
    }
    Ok((worst <= 1e-8, format!("max |F_IE| over 50 random + GHZ/product probes = {worst:.2e}")))
}

fn c5_optimal_measurement() -> Outcome {
    let mut worst = 0.0f64;
    for ghz in [true, false] {
        for n in 1..=4 {
            for theta in open_grid() {
                let pair = probe(ghz, n, theta, EncodingMode::Reversed)?;
                let q = qfi_re_general(&pair, AN)?.value;
                worst = worst.max((cfi_lbm(&pair, AN)? - q).abs()).max((cfi_lst(&pair, AN)? - q).abs());
            }
        }
    }
    Ok((worst <= 1e-9, format!("max |CFI - QFI| for lbm/lst = {worst:.2e}")))
}

/// Maximum of `f` on a fine grid of `(0, pi/2)`, refined by golden section.
fn peak(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let pts = 4000;
    let step = FRAC_PI_2 / pts as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 1..pts {
        let t = i as f64 * step;
        let v = f(t)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if f(x1)? > f(x2)? {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(best.1.max(f(0.5 * (a + b))?))
}

fn c6_dm_peak() -> Outcome {
    let p = peak(|t| cfi_dm(&ghz_pair(2, t, EncodingMode::Reversed)?, AN))?;
    let pct = 100.0 * p / 8.0;
    let ok = (p - 0.990).abs() <= 0.005 && (pct - 12.4).abs() <= 0.5;
    Ok((ok, format!("max cfi_dm = {p:.5} ({pct:.2}% of F_max = 8)")))
}

fn c7_grm_peak() -> Outcome {
    let p = peak(|t| cfi_grm(&ghz_pair(2, t, EncodingMode::Reversed)?, AN))?;
    Ok(((p - 0.769).abs() <= 0.005, format!("max cfi_grm = {p:.5} ({:.2}% of F_max = 8)", 100.0 * p / 8.0)))
}

fn c8_exponential_loss() -> Outcome {
    let n = 10usize;
    let scale = (n * n) as f64 / 2f64.powi(n as i32);
    let dm = peak(|t| Ok(cfi_dm_ghz_closed(n, t)))?;
    let grm = peak(|t| Ok(cfi_grm_ghz_closed(n, t)))?;
    let (e_dm, e_grm) = (rel(dm, scale), rel(grm, (12.0 - 8.0 * 2f64.sqrt()) * scale));
    Ok((
        e_dm <= 0.15 && e_grm <= 0.15,
        format!("N=10: dm {dm:.5} (rel dev {e_dm:.3}), grm {grm:.5} (rel dev {e_grm:.3})"),
    ))
}

fn c9_gui_comparison() -> Outcome {
    let n = 2usize;
    let nn = n as f64;
    let mut worst = 0.0f64;
    let mut gui_min = f64::INFINITY;
    let mut lui_min = f64::INFINITY;
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 * FRAC_PI_2 / 200.0).collect();
    for &t in &grid {
        let gui = lui_metrology::fisher::qfi_gui_re(&ghz_pair(n, t, EncodingMode::Reversed)?, AN)?.value;
        let c2 = (nn * t).cos().powi(2);
        worst = worst.max((gui - 4.0 * nn * nn * c2 / (1.0 + c2)).abs());
        gui_min = gui_min.min(gui);
        lui_min = lui_min.min(qfi_ghz_closed(n, t));
    }
    let sql = 2.0 * nn;
    let ok = worst <= 1e-6 && gui_min < sql && lui_min >= sql - 1e-9;
    Ok((ok, format!("max dev {worst:.2e}; min gui {gui_min:.4}, min lui {lui_min:.6} vs SQL {sql}")))
}

fn c10_twirl_oracle() -> Outcome {
    let pair = ghz_pair(2, 0.3, EncodingMode::Reversed)?;
    let mc = mc_convergence(&pair, &[20_000], SEED)?[0];
    let inv = invariance_suite(&lui_coefficients(&pair)?, 100, SEED)?;
    Ok((
        mc.trace_distance <= 0.03 && inv.passed && inv.distance.trace_distance <= 1e-10,
        format!("mc distance {:.4}; invariance max distance {:.2e}", mc.trace_distance, inv.distance.trace_distance),
    ))
}

fn c11_spectrum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst, mut norm_err) = (0.0f64, 0.0f64);
    for i in 0..12 {
        let n = 1 + i % 3;
        let pair = random_local_pair(n, 0.1 + 0.1 * i as f64, EncodingMode::Reversed, &mut rng)?;
        let lui = lui_coefficients(&pair)?;
        let spectrum = lui_spectrum(&lui);
        let mut predicted: Vec<f64> =
            spectrum.iter().flat_map(|e| std::iter::repeat_n(e.eigenvalue, e.degeneracy as usize)).collect();
        predicted.sort_by(f64::total_cmp);
        let dense = lui_density(&lui)?.eigenvalues()?;
        if dense.len() != predicted.len() {
            return Ok((false, format!("N={n}: degeneracies sum to {} not {}", predicted.len(), dense.len())));
        }
        worst = predicted.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        let total: f64 = spectrum.iter().map(|e| e.eigenvalue * e.degeneracy as f64).sum();
        norm_err = norm_err.max((total - 1.0).abs());
    }
    Ok((
        worst <= 1e-9 && norm_err <= 1e-9,
        format!("max eigenvalue dev {worst:.2e}; max |sum s_b l_b - 1| {norm_err:.2e}"),
    ))
}

fn c12_commutant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut found = Vec::new();
    let mut ok = true;
    for n in 1..=3 {
        let r = commutant_dimension(&CommutantQuery::new(n, 2, 2), &mut rng)?;
        ok &= r.dimension == 1 << n && !r.under_constrained;
        found.push(format!("N={n},k=2: {}", r.dimension));
    }
    for n in 1..=3 {
        let r = commutant_dimension(&CommutantQuery::new(n, 2, 1), &mut rng)?;
        ok &= r.traceless_dimension == 0 && !r.under_constrained;
        found.push(format!("N={n},k=1: traceless {}", r.traceless_dimension));
    }
    Ok((ok, found.join("; ")))
}

fn c13_crb() -> Outcome {
    let theta = 0.05;
    let pair = ghz_pair(2, theta, EncodingMode::Reversed)?;
    let window = SearchWindow::around(theta, 0.5)?;
    let lbm = estimate_repeated(&pair, Strategy::Lbm, 100_000, 200, SEED, window)?;
    let dm = estimate_repeated(&pair, Strategy::Dm, 100_000, 200, SEED, window)?;
    let factor = dm.variance / lbm.variance;
    Ok((
        (0.8..=1.2).contains(&lbm.ratio) && factor >= 5.0,
        format!("lbm var/crb {:.3}; dm var / lbm var {factor:.1}", lbm.ratio),
    ))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("GHZ Heisenberg limit", c1_heisenberg_limit, 5),
        ("product SQL", c2_product_sql, 5),
        ("closed forms vs pipeline", c3_closed_forms, 30),
        ("no-go for identical encoding", c4_no_go, 30),
        ("LBM/LST optimal", c5_optimal_measurement, 10),
        ("DM peak", c6_dm_peak, 5),
        ("GRM peak", c7_grm_peak, 5),
        ("exponential loss at N=10", c8_exponential_loss, 5),
        ("GUI vs LUI", c9_gui_comparison, 5),
        ("twirl oracle", c10_twirl_oracle, 60),
        ("spectrum consistency", c11_spectrum, 30),
        ("commutant dimensions", c12_commutant, 60),
        ("CRB saturation", c13_crb, 120),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.2}s / {budget}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
