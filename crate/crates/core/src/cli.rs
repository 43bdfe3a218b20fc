//! Command-line front end: Fisher scans, verification suites, estimation runs and commutant queries.
//!
//! Everything the binary does goes through [`run`], so tests drive the same code path.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{f0, qfi_gui_re, qfi_ie_general, qfi_re_general, Derivative};
use crate::measure::{
    cfi_dm, cfi_grm, cfi_gst, cfi_lbm, cfi_lst, estimate_repeated, EstimationReport, SearchWindow, Strategy,
};
use crate::states::{ghz_pair, make_pair, product_pair, EncodedPair, EncodingMode, HamiltonianSpec};
use crate::tensor::{haar_unitary, pauli_x, pauli_y, pauli_z, QuditLayout, StateVector, C64};
use crate::twirl::{gui_density, gui_state, lui_coefficients, pair_density, LuiState};
use crate::verify::{
    commutant_dimension, invariance_suite, mc_convergence, rotation_invariance, CommutantQuery, CommutantResult,
    Locality, RotationModel,
};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Ghz,
    Product,
}

impl Probe {
    pub fn pair(self, n: usize, theta: f64, mode: EncodingMode) -> Result<EncodedPair> {
        match self {
            Probe::Ghz => ghz_pair(n, theta, mode),
            Probe::Product => product_pair(n, theta, mode),
        }
    }
}

/// One column of a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ScanStrategy {
    QfiRe,
    QfiIe,
    QfiGui,
    F0,
    CfiDm,
    CfiGrm,
    CfiGst,
    CfiLst,
    CfiLbm,
}

impl ScanStrategy {
    pub const ALL: [ScanStrategy; 9] = [
        ScanStrategy::QfiRe,
        ScanStrategy::QfiIe,
        ScanStrategy::QfiGui,
        ScanStrategy::F0,
        ScanStrategy::CfiDm,
        ScanStrategy::CfiGrm,
        ScanStrategy::CfiGst,
        ScanStrategy::CfiLst,
        ScanStrategy::CfiLbm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanStrategy::QfiRe => "qfi_re",
            ScanStrategy::QfiIe => "qfi_ie",
            ScanStrategy::QfiGui => "qfi_gui",
            ScanStrategy::F0 => "f0",
            ScanStrategy::CfiDm => "cfi_dm",
            ScanStrategy::CfiGrm => "cfi_grm",
            ScanStrategy::CfiGst => "cfi_gst",
            ScanStrategy::CfiLst => "cfi_lst",
            ScanStrategy::CfiLbm => "cfi_lbm",
        }
    }

    fn needs_qubits(self) -> bool {
        matches!(self, ScanStrategy::CfiLbm)
    }

    /// Value at one grid point. `re` and `ie` are the two encodings of the probe.
    pub fn evaluate(self, re: &EncodedPair, ie: &EncodedPair, derivative: Derivative) -> Result<f64> {
        match self {
            ScanStrategy::QfiRe => Ok(qfi_re_general(re, derivative)?.value),
            ScanStrategy::QfiIe => Ok(qfi_ie_general(ie, derivative)?.value),
            ScanStrategy::QfiGui => Ok(qfi_gui_re(re, derivative)?.value),
            ScanStrategy::F0 => f0(&re.initial, &re.hamiltonian),
            ScanStrategy::CfiDm => cfi_dm(re, derivative),
            ScanStrategy::CfiGrm => cfi_grm(re, derivative),
            ScanStrategy::CfiGst => cfi_gst(re, derivative),
            ScanStrategy::CfiLst => cfi_lst(re, derivative),
            ScanStrategy::CfiLbm => cfi_lbm(re, derivative),
        }
    }
}

impl std::fmt::Display for ScanStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub probe: Probe,
    pub n_sites: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_points: usize,
    pub strategies: Vec<ScanStrategy>,
    /// Central-difference step; analytic derivatives when absent.
    #[serde(default)]
    pub derivative_step: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            probe: Probe::Ghz,
            n_sites: 2,
            theta_min: 0.0,
            theta_max: std::f64::consts::FRAC_PI_2,
            theta_points: 101,
            strategies: vec![ScanStrategy::QfiRe],
            derivative_step: None,
            seed: DEFAULT_SEED,
            out: None,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::Config("n_sites must be at least 1".into()));
        }
        if self.theta_points < 2 {
            return Err(Error::Config(format!("theta_points must be at least 2, got {}", self.theta_points)));
        }
        if !(self.theta_min.is_finite() && self.theta_max.is_finite() && self.theta_max > self.theta_min) {
            return Err(Error::Config(format!(
                "theta grid must be strictly increasing, got [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::Config(format!("strategy {s} listed twice")));
            }
        }
        // Both probes are qubit registers; kept so a qudit probe cannot slip through.
        let layout = QuditLayout::qubits(self.n_sites)?;
        if let Some(s) = self.strategies.iter().find(|s| s.needs_qubits() && layout.local_dim() != 2) {
            return Err(Error::Config(format!("{s} needs d = 2")));
        }
        self.derivative()?;
        Ok(())
    }

    pub fn derivative(&self) -> Result<Derivative> {
        match self.derivative_step {
            None => Ok(Derivative::Analytic),
            Some(h) if h > 0.0 && h.is_finite() => Ok(Derivative::Central(h)),
            Some(h) => Err(Error::Config(format!("derivative step must be positive, got {h}"))),
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        let n = self.theta_points;
        let span = self.theta_max - self.theta_min;
        (0..n)
            .map(|i| if i + 1 == n { self.theta_max } else { self.theta_min + span * i as f64 / (n - 1) as f64 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanTable {
    pub thetas: Vec<f64>,
    pub strategies: Vec<ScanStrategy>,
    /// `rows[i][j]` is strategy `j` at `thetas[i]`.
    pub rows: Vec<Vec<f64>>,
}

impl ScanTable {
    pub fn column(&self, s: ScanStrategy) -> Option<Vec<f64>> {
        let j = self.strategies.iter().position(|x| *x == s)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<&str> = std::iter::once("theta").chain(self.strategies.iter().map(|s| s.name())).collect();
        writeln!(w, "{}", header.join(","))?;
        for (theta, row) in self.thetas.iter().zip(&self.rows) {
            let cells: Vec<String> = std::iter::once(*theta).chain(row.iter().copied()).map(format_sig).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Metadata written next to a scan CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSidecar {
    pub config: ScanConfig,
    pub columns: Vec<String>,
    pub derivative: String,
    /// Heisenberg limit `2 N^2`.
    pub f_max: f64,
    /// Standard quantum limit `2 N`.
    pub sql: f64,
    pub seed: u64,
    pub version: &'static str,
}

impl ScanSidecar {
    pub fn new(cfg: &ScanConfig) -> Self {
        let n = cfg.n_sites as f64;
        let derivative = match cfg.derivative_step {
            None => "analytic".to_string(),
            Some(h) => format!("central({h})"),
        };
        Self {
            config: cfg.clone(),
            columns: std::iter::once("theta".to_string()).chain(cfg.strategies.iter().map(|s| s.to_string())).collect(),
            derivative,
            f_max: 2.0 * n * n,
            sql: 2.0 * n,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Evaluates every strategy on the grid. Rows come back in grid order.
pub fn scan_table(cfg: &ScanConfig) -> Result<ScanTable> {
    cfg.validate()?;
    let derivative = cfg.derivative()?;
    let thetas = cfg.thetas();
    let rows = thetas
        .par_iter()
        .map(|&theta| {
            let re = cfg.probe.pair(cfg.n_sites, theta, EncodingMode::Reversed)?;
            let ie = cfg.probe.pair(cfg.n_sites, theta, EncodingMode::Identical)?;
            cfg.strategies.iter().map(|s| s.evaluate(&re, &ie, derivative)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTable { thetas, strategies: cfg.strategies.clone(), rows })
}

/// Path of the JSON sidecar for a CSV output path.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Runs a scan and writes the CSV plus sidecar. Without an output path the
/// CSV goes to `out` and the sidecar to `meta`.
pub fn run_scan<W: Write, M: Write>(cfg: &ScanConfig, out: &mut W, meta: &mut M) -> Result<ScanTable> {
    let table = scan_table(cfg)?;
    let sidecar = serde_json::to_string_pretty(&ScanSidecar::new(cfg))?;
    match &cfg.out {
        Some(path) => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            fs::write(path, buf).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            let side = sidecar_path(path);
            fs::write(&side, sidecar + "\n")
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", side.display())))?;
        }
        None => {
            table.write_csv(&mut *out)?;
            writeln!(meta, "{sidecar}")?;
        }
    }
    Ok(table)
}

/// `x` to 12 significant digits, plain notation for moderate exponents.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        trim_zeros(&format!("{:.*}", (11 - exp) as usize, x)).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    Twirl,
    Invariance,
    Commutant,
    NoGo,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    Equals,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: Option<f64>,
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub error: Option<String>,
}

impl Check {
    fn measure(
        suite: Suite,
        name: impl Into<String>,
        comparison: Comparison,
        threshold: f64,
        value: Result<f64>,
    ) -> Self {
        let name = name.into();
        match value {
            Ok(v) => {
                let passed = match comparison {
                    Comparison::AtMost => v <= threshold,
                    Comparison::AtLeast => v >= threshold,
                    Comparison::Equals => v == threshold,
                };
                Self { suite, name, value: Some(v), threshold, comparison, passed, error: None }
            }
            Err(e) => {
                Self { suite, name, value: None, threshold, comparison, passed: false, error: Some(e.to_string()) }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    /// Hand-supplied LUI coefficients checked by the invariance suite.
    pub coeffs: Option<Vec<f64>>,
    /// Largest site count for the scaling checks.
    pub max_sites: Option<usize>,
}

pub fn run_verify(suite: Suite, seed: u64, opts: &VerifyOptions) -> VerifyReport {
    let mut checks = Vec::new();
    let suites = match suite {
        Suite::All => vec![Suite::Twirl, Suite::Invariance, Suite::Commutant, Suite::NoGo],
        s => vec![s],
    };
    for s in suites {
        match s {
            Suite::Twirl => twirl_checks(seed, &mut checks),
            Suite::Invariance => invariance_checks(seed, opts, &mut checks),
            Suite::Commutant => commutant_checks(seed, &mut checks),
            Suite::NoGo => no_go_checks(seed, opts.max_sites.unwrap_or(4), &mut checks),
            Suite::All => unreachable!(),
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    VerifyReport { suite, seed, passed, checks }
}

const MC_SCHEDULE: [usize; 3] = [100, 1000, 20_000];

fn twirl_checks(seed: u64, checks: &mut Vec<Check>) {
    let reports = ghz_pair(2, 0.3, EncodingMode::Reversed).and_then(|p| mc_convergence(&p, &MC_SCHEDULE, seed));
    match reports {
        Ok(r) => {
            let last = r.last().expect("non-empty schedule");
            checks.push(Check::measure(
                Suite::Twirl,
                format!("mc_trace_distance_n2_{}_samples", last.samples),
                Comparison::AtMost,
                0.03,
                Ok(last.trace_distance),
            ));
            checks.push(Check::measure(
                Suite::Twirl,
                "mc_distance_shrinks",
                Comparison::AtMost,
                r[0].trace_distance,
                Ok(last.trace_distance),
            ));
        }
        Err(e) => checks.push(Check::measure(Suite::Twirl, "mc_trace_distance_n2", Comparison::AtMost, 0.03, Err(e))),
    }
}

const INVARIANCE_TRIALS: usize = 100;

fn invariance_checks(seed: u64, opts: &VerifyOptions, checks: &mut Vec<Check>) {
    if let Some(coeffs) = &opts.coeffs {
        let lui = custom_lui(coeffs);
        let inv = lui.and_then(|l| invariance_suite(&l, INVARIANCE_TRIALS, seed));
        checks.push(Check::measure(
            Suite::Invariance,
            "custom_coeffs_min_eigenvalue",
            Comparison::AtLeast,
            -1e-10,
            inv.as_ref().map(|r| r.min_eigenvalue).map_err(clone_err),
        ));
        checks.push(Check::measure(
            Suite::Invariance,
            "custom_coeffs_rotation_distance",
            Comparison::AtMost,
            1e-10,
            inv.map(|r| r.distance.trace_distance),
        ));
        return;
    }
    for mode in [EncodingMode::Reversed, EncodingMode::Identical] {
        let tag = mode.to_string().to_lowercase();
        for n in 1..=3 {
            let inv = ghz_pair(n, 0.3, mode)
                .and_then(|p| lui_coefficients(&p))
                .and_then(|l| invariance_suite(&l, INVARIANCE_TRIALS, seed));
            checks.push(Check::measure(
                Suite::Invariance,
                format!("lui_{tag}_ghz_n{n}_rotation_distance"),
                Comparison::AtMost,
                1e-10,
                inv.as_ref().map(|r| r.distance.trace_distance).map_err(clone_err),
            ));
            checks.push(Check::measure(
                Suite::Invariance,
                format!("lui_{tag}_ghz_n{n}_min_eigenvalue"),
                Comparison::AtLeast,
                -1e-10,
                inv.map(|r| r.min_eigenvalue),
            ));
        }
    }
    let gui = ghz_pair(2, 0.3, EncodingMode::Reversed)
        .and_then(|p| gui_state(&p))
        .and_then(|g| gui_density(&g))
        .and_then(|rho| rotation_invariance(&rho, INVARIANCE_TRIALS, seed, RotationModel::Uniform));
    checks.push(Check::measure(
        Suite::Invariance,
        "gui_ghz_n2_uniform_rotation_distance",
        Comparison::AtMost,
        1e-10,
        gui.map(|r| r.trace_distance),
    ));
    let raw = ghz_pair(2, 0.3, EncodingMode::Reversed)
        .and_then(|p| pair_density(&p))
        .and_then(|rho| rotation_invariance(&rho, INVARIANCE_TRIALS, seed, RotationModel::PerSite));
    checks.push(Check::measure(
        Suite::Invariance,
        "untwirled_ghz_n2_rotation_distance",
        Comparison::AtLeast,
        0.1,
        raw.map(|r| r.trace_distance),
    ));
}

fn clone_err(e: &Error) -> Error {
    Error::Config(e.to_string())
}

/// Qubit LUI state from `2^N` coefficients. Positivity is not checked here;
/// that is the suite's job.
pub fn custom_lui(coeffs: &[f64]) -> Result<LuiState> {
    let len = coeffs.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Config(format!("need 2^N coefficients, got {len}")));
    }
    let layout = QuditLayout::qubits(len.trailing_zeros() as usize)?;
    LuiState::new(layout, coeffs.to_vec(), EncodingMode::Reversed, 0.0)
}

fn commutant_checks(seed: u64, checks: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 1..=3 {
        let r = commutant_dimension(&CommutantQuery::new(n, 2, 2), &mut rng);
        push_commutant(checks, format!("n{n}_k2_d2_dimension"), (1 << n) as f64, r, |r| r.dimension);
    }
    for n in 1..=3 {
        let r = commutant_dimension(&CommutantQuery::new(n, 2, 1), &mut rng);
        push_commutant(checks, format!("n{n}_k1_d2_traceless_dimension"), 0.0, r, |r| r.traceless_dimension);
    }
}

fn push_commutant(
    checks: &mut Vec<Check>,
    name: String,
    expected: f64,
    r: Result<CommutantResult>,
    pick: fn(&CommutantResult) -> usize,
) {
    let value = r.and_then(|r| {
        if r.under_constrained {
            Err(Error::Unsupported(format!("a stable solution (under-constrained: {r:?})")))
        } else {
            Ok(pick(&r) as f64)
        }
    });
    checks.push(Check::measure(Suite::Commutant, name, Comparison::Equals, expected, value));
}

const NO_GO_TOL: f64 = 1e-8;
const NO_GO_RANDOM_PROBES: usize = 10;

fn no_go_checks(seed: u64, max_sites: usize, checks: &mut Vec<Check>) {
    let thetas = [0.0, 0.2, 0.7, 1.3];
    for probe in [Probe::Ghz, Probe::Product] {
        for n in 1..=max_sites {
            let worst = thetas.iter().try_fold(0.0f64, |m, &t| {
                let pair = probe.pair(n, t, EncodingMode::Identical)?;
                Ok(m.max(qfi_ie_general(&pair, Derivative::Analytic)?.value.abs()))
            });
            checks.push(Check::measure(
                Suite::NoGo,
                format!("ie_{probe:?}_n{n}_max_qfi").to_lowercase(),
                Comparison::AtMost,
                NO_GO_TOL,
                worst,
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let worst = (0..NO_GO_RANDOM_PROBES).try_fold(0.0f64, |m, i| {
        let n = 1 + i % max_sites.clamp(1, 3);
        let pair = random_local_pair(n, 0.1 + 0.13 * i as f64, EncodingMode::Identical, &mut rng)?;
        Ok(m.max(qfi_ie_general(&pair, Derivative::Analytic)?.value.abs()))
    });
    checks.push(Check::measure(
        Suite::NoGo,
        format!("ie_random_probes_{NO_GO_RANDOM_PROBES}_max_qfi"),
        Comparison::AtMost,
        NO_GO_TOL,
        worst,
    ));
}

/// Random qubit probe encoded by a random 1-local Hamiltonian.
pub fn random_local_pair<R: rand::Rng + ?Sized>(
    n: usize,
    theta: f64,
    mode: EncodingMode,
    rng: &mut R,
) -> Result<EncodedPair> {
    let layout = QuditLayout::qubits(n)?;
    let psi = StateVector::random(layout, rng);
    let terms: Vec<_> = (0..n)
        .map(|i| {
            let u = haar_unitary(2, rng);
            let h = u.matrix()
                * (pauli_z() + pauli_x() * C64::new(0.3, 0.0) + pauli_y() * C64::new(0.1, 0.0))
                * u.matrix().adjoint();
            (i, (&h + h.adjoint()) * C64::new(0.5, 0.0))
        })
        .collect();
    let h = HamiltonianSpec::local_sum(layout, &terms)?;
    make_pair(&psi, &h, theta, mode)
}

fn default_half_width() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub probe: Probe,
    pub n_sites: usize,
    pub strategy: Strategy,
    pub true_theta: f64,
    pub shots: u64,
    pub repetitions: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_half_width")]
    pub window_half_width: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            probe: Probe::Ghz,
            n_sites: 2,
            strategy: Strategy::Lbm,
            true_theta: 0.05,
            shots: 100_000,
            repetitions: 200,
            seed: DEFAULT_SEED,
            window_half_width: default_half_width(),
            out: None,
        }
    }
}

impl EstimateConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.strategy, Strategy::Lbm | Strategy::Dm | Strategy::Gst) {
            return Err(Error::Config(format!("estimation supports lbm, dm and gst, not {}", self.strategy)));
        }
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.repetitions < 2 {
            return Err(Error::Config("repetitions must be at least 2".into()));
        }
        if self.n_sites == 0 {
            return Err(Error::Config("n_sites must be at least 1".into()));
        }
        if self.window_half_width.is_nan() || self.window_half_width <= 0.0 {
            return Err(Error::Config("window half width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateOutput {
    pub probe: Probe,
    pub n_sites: usize,
    #[serde(flatten)]
    pub report: EstimationReport,
}

pub fn run_estimate(cfg: &EstimateConfig) -> Result<EstimateOutput> {
    cfg.validate()?;
    let pair = cfg.probe.pair(cfg.n_sites, cfg.true_theta, EncodingMode::Reversed)?;
    let window = SearchWindow::around(cfg.true_theta, cfg.window_half_width)?;
    let report = estimate_repeated(&pair, cfg.strategy, cfg.shots, cfg.repetitions, cfg.seed, window)?;
    Ok(EstimateOutput { probe: cfg.probe, n_sites: cfg.n_sites, report })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutantOutput {
    pub query: CommutantQuery,
    pub seed: u64,
    #[serde(flatten)]
    pub result: CommutantResult,
}

pub fn run_commutant(q: &CommutantQuery, seed: u64) -> Result<CommutantOutput> {
    let result = commutant_dimension(q, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(CommutantOutput { query: *q, seed, result })
}

#[derive(Debug, Parser)]
#[command(name = "lui-metrology", version, about = "Fisher scans, oracles and estimation for twirled two-copy states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fisher information on a theta grid, as CSV plus a JSON sidecar.
    Scan(ScanArgs),
    /// Run a verification suite; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Repeated MLE experiments compared with the Cramer-Rao bound.
    Estimate(EstimateArgs),
    /// Dimension of the collective-rotation commutant.
    Commutant(CommutantArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub probe: Option<Probe>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub theta_points: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategies: Option<Vec<ScanStrategy>>,
    /// Central-difference step (analytic derivatives by default).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
    /// CSV path; the sidecar goes to the same path with a .json extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Comma-separated LUI coefficients to check instead of the built-in states.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub coeffs: Option<Vec<f64>>,
    /// Largest site count in the no-go checks.
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub probe: Option<Probe>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CommutantArgs {
    #[arg(long, default_value_t = 2)]
    pub sites: usize,
    #[arg(long, default_value_t = 2)]
    pub local_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub copies: usize,
    #[arg(long, value_enum, default_value = "per_site")]
    pub locality: LocalityArg,
    #[arg(long, default_value_t = 8)]
    pub probes: usize,
    #[arg(long, value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum LocalityArg {
    PerSite,
    Global,
}

/// Decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("bad seed `{s}`: {e}"))
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl ScanArgs {
    pub fn resolve(&self) -> Result<ScanConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_config(p)?,
            None => ScanConfig::default(),
        };
        if let Some(v) = self.probe {
            cfg.probe = v;
        }
        if let Some(v) = self.sites {
            cfg.n_sites = v;
        }
        if let Some(v) = self.theta_min {
            cfg.theta_min = v;
        }
        if let Some(v) = self.theta_max {
            cfg.theta_max = v;
        }
        if let Some(v) = self.theta_points {
            cfg.theta_points = v;
        }
        if let Some(v) = &self.strategies {
            cfg.strategies = v.clone();
        }
        if self.step.is_some() {
            cfg.derivative_step = self.step;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl EstimateArgs {
    pub fn resolve(&self) -> Result<EstimateConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_config(p)?,
            None => EstimateConfig::default(),
        };
        if let Some(v) = self.probe {
            cfg.probe = v;
        }
        if let Some(v) = self.sites {
            cfg.n_sites = v;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.theta {
            cfg.true_theta = v;
        }
        if let Some(v) = self.shots {
            cfg.shots = v;
        }
        if let Some(v) = self.reps {
            cfg.repetitions = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit status for an error: 2 for anything the caller can fix by changing
/// the configuration, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidLayout(_)
        | Error::DimensionCap { .. }
        | Error::Unsupported(_)
        | Error::Json(_) => EXIT_BAD_CONFIG,
        _ => EXIT_CHECK_FAILED,
    }
}

fn emit_json<T: Serialize, W: Write>(value: &T, path: Option<&Path>, out: &mut W) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => Ok(writeln!(out, "{text}")?),
    }
}

fn dispatch<W: Write, E: Write>(cli: &Cli, out: &mut W, err: &mut E) -> Result<i32> {
    match &cli.command {
        Command::Scan(args) => {
            let cfg = args.resolve()?;
            run_scan(&cfg, out, err)?;
            Ok(EXIT_OK)
        }
        Command::Verify(args) => {
            let opts = VerifyOptions { coeffs: args.coeffs.clone(), max_sites: args.sites };
            let report = run_verify(args.suite, args.seed, &opts);
            emit_json(&report, args.out.as_deref(), out)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                writeln!(
                    err,
                    "FAIL {}: value {:?}, threshold {}{}",
                    c.name,
                    c.value,
                    c.threshold,
                    c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                )?;
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Estimate(args) => {
            let cfg = args.resolve()?;
            let report = run_estimate(&cfg)?;
            emit_json(&report, cfg.out.as_deref(), out)?;
            Ok(EXIT_OK)
        }
        Command::Commutant(args) => {
            let locality = match args.locality {
                LocalityArg::PerSite => Locality::OneLocalPerSiteCollective,
                LocalityArg::Global => Locality::UnrestrictedSymmetric,
            };
            let q = CommutantQuery {
                n_sites: args.sites,
                local_dim: args.local_dim,
                copies: args.copies,
                locality,
                probe_count: args.probes,
            };
            let report = run_commutant(&q, args.seed)?;
            emit_json(&report, args.out.as_deref(), out)?;
            Ok(if report.result.under_constrained { EXIT_CHECK_FAILED } else { EXIT_OK })
        }
    }
}

/// Parses `args` and runs the subcommand, returning the process exit status.
pub fn run<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_BAD_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
