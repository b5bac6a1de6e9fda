//! Scenario configuration, study drivers and their exports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{self, catalog, CGrid, EntropyReport, HalfSign, DEFAULT_C_TOL};
use crate::error::{Error, Result};
use crate::estimates::{self, EstimateLedger, GronwallBound, LqVerdict, DEFAULT_CONSTANT};
use crate::grid::{Field, Grid};
use crate::helmholtz::HelmholtzBackend;
use crate::io::{read_field, Exporter, Manifest};
use crate::noise::{derive_seed, sample_path, NoiseMode, NoisePath, NoiseSpec};
use crate::stepper::{run_at, uniform_times, SolverConfig, Trajectory};

/// Peakon-type data and noise modes must be below this at `x = ±L`.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Pressure positivity threshold, relative to `max p`.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Declared constant of the per-snapshot `S(y)` tolerance `C (Δt + Δx) S(y₀)`.
pub const STEP_TOL_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_length: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.n_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub seed: u64,
    /// Steps of the coarsest sampled path on `[0, T]`.
    #[serde(default = "default_noise_steps")]
    pub steps: usize,
    #[serde(default)]
    pub modes: Vec<NoiseMode>,
}

fn default_noise_steps() -> usize {
    64
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            seed: 0,
            steps: default_noise_steps(),
            modes: Vec::new(),
        }
    }
}

impl NoiseSection {
    pub fn spec(&self) -> NoiseSpec {
        NoiseSpec {
            modes: self.modes.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `c e^{-|x - x₀|}`
    Peakon { c: f64, x0: f64 },
    /// `c e^{-|x + s/2|} - c e^{-|x - s/2|}`
    AntipeakonPair { c: f64, separation: f64 },
    /// `a sin(kπx / L)`, periodic for integer `k`.
    Sine { amplitude: f64, wavenumber: f64 },
    /// `u_left` on `[-L, 0)`, `u_right` on `[0, L)`; the periodic wrap adds a second jump at `±L`.
    Riemann { u_left: f64, u_right: f64 },
    /// A field dump on the scenario grid.
    File { path: PathBuf },
}

pub fn initial_data(desc: &InitialData, grid: Grid) -> Result<Field> {
    let l = grid.half_length();
    let field = match desc {
        InitialData::Peakon { c, x0 } => Field::from_fn(grid, |x| c * (-(x - x0).abs()).exp())?,
        InitialData::AntipeakonPair { c, separation } => {
            let h = 0.5 * separation;
            Field::from_fn(grid, |x| c * (-(x + h).abs()).exp() - c * (-(x - h).abs()).exp())?
        }
        InitialData::Sine { amplitude, wavenumber } => {
            let k = wavenumber * std::f64::consts::PI / l;
            Field::from_fn(grid, |x| amplitude * (k * x).sin())?
        }
        InitialData::Riemann { u_left, u_right } => {
            Field::from_fn(grid, |x| if x < 0.0 { *u_left } else { *u_right })?
        }
        InitialData::File { path } => {
            let (f, _) = read_field(path)?;
            if *f.grid() != grid {
                return Err(Error::Config(format!(
                    "{} holds a field on a different grid",
                    path.display()
                )));
            }
            f
        }
    };
    if matches!(desc, InitialData::Peakon { .. } | InitialData::AntipeakonPair { .. }) {
        let edge = field.values()[0].abs().max(field.values()[grid.n_points() - 1].abs());
        if edge >= BOUNDARY_TOL {
            return Err(Error::Config(format!(
                "peakon data is {edge:e} at the boundary; enlarge the half length"
            )));
        }
    }
    Ok(field)
}

fn default_snapshots() -> usize {
    40
}
fn default_c_levels() -> usize {
    41
}
fn default_c_pad() -> f64 {
    0.1
}
fn default_constant() -> f64 {
    DEFAULT_CONSTANT
}
fn default_c_tol() -> f64 {
    DEFAULT_C_TOL
}
fn default_window() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_test_functions() -> Vec<usize> {
    (0..6).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticPlan {
    /// Evenly spaced snapshots in `(0, T]`.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_true")]
    pub ledger: bool,
    /// Constant `C` of the Gronwall and `L^q` envelopes.
    #[serde(default = "default_constant")]
    pub constant: f64,
    #[serde(default = "default_true")]
    pub entropy: bool,
    #[serde(default = "default_c_levels")]
    pub c_levels: usize,
    #[serde(default = "default_c_pad")]
    pub c_pad: f64,
    #[serde(default = "default_c_tol")]
    pub c_tol: f64,
    /// Indices into the six-function catalog.
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<usize>,
    /// Dump `z` at every snapshot, not just the last.
    #[serde(default)]
    pub dump_fields: bool,
    /// Fraction of `[-L, L)` used for local norms.
    #[serde(default = "default_window")]
    pub window: f64,
}

impl Default for DiagnosticPlan {
    fn default() -> Self {
        toml::from_str("").expect("all diagnostic fields have defaults")
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-2, 3e-3, 1e-3, 3e-4]
}
fn default_meshes() -> Vec<usize> {
    vec![512, 1024, 2048]
}
fn default_members() -> usize {
    8
}
fn default_cesaro_levels() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPlan {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_meshes")]
    pub meshes: Vec<usize>,
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(default = "default_cesaro_levels")]
    pub cesaro_levels: usize,
}

impl Default for StudyPlan {
    fn default() -> Self {
        toml::from_str("").expect("all study fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    #[serde(default)]
    pub noise: NoiseSection,
    pub initial: InitialData,
    #[serde(default)]
    pub diagnostics: DiagnosticPlan,
    #[serde(default)]
    pub study: StudyPlan,
}

/// Scenario files shipped with the crate.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("peakon", include_str!("../scenarios/peakon.toml")),
    ("stochastic_peakon", include_str!("../scenarios/stochastic_peakon.toml")),
    ("collision", include_str!("../scenarios/collision.toml")),
    ("smooth", include_str!("../scenarios/smooth.toml")),
    ("burgers_riemann", include_str!("../scenarios/burgers_riemann.toml")),
    ("eps_ladder", include_str!("../scenarios/eps_ladder.toml")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Sets `key.path = value` in a TOML table. The value is parsed as TOML and
/// taken as a bare string if that fails.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Usage(format!("override key {key:?} passes through a non-table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario file: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a scenario file, or a shipped scenario when `source` names one
    /// and no such file exists.
    pub fn load(source: &str, overrides: &[String]) -> Result<Self> {
        let path = Path::new(source);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Self::from_toml_str(&text, overrides);
        }
        match builtin(source) {
            Some(text) => Self::from_toml_str(text, overrides),
            None => Err(Error::Config(format!(
                "{source} is neither a file nor a shipped scenario"
            ))),
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = builtin(name).ok_or_else(|| Error::Config(format!("no shipped scenario {name}")))?;
        Self::from_toml_str(text, &[])
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.solver.validate()?;
        let spec = self.noise.spec();
        spec.validate()?;
        if self.noise.steps == 0 {
            return Err(Error::Config("noise.steps must be positive".into()));
        }
        if !spec.is_zero() {
            let edge = spec.boundary_magnitude(grid.half_length());
            if edge >= BOUNDARY_TOL {
                return Err(Error::Config(format!(
                    "noise modes reach {edge:e} at the boundary; enlarge the half length"
                )));
            }
        }
        let d = &self.diagnostics;
        if d.snapshots < 2 {
            return Err(Error::Config("diagnostics.snapshots must be at least 2".into()));
        }
        if d.c_levels < 2 {
            return Err(Error::Config("diagnostics.c_levels must be at least 2".into()));
        }
        if let Some(&bad) = d.test_functions.iter().find(|&&i| i >= 6) {
            return Err(Error::Config(format!("test function index {bad} outside the catalog")));
        }
        if !(d.window > 0.0 && d.window <= 1.0) {
            return Err(Error::Config("diagnostics.window must lie in (0, 1]".into()));
        }
        if !(d.constant > 0.0 && d.c_tol > 0.0) {
            return Err(Error::Config("constants must be positive".into()));
        }
        if let InitialData::File { .. } = self.initial {
        } else {
            initial_data(&self.initial, grid)?;
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.noise.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.seed = seed;
        self
    }

    /// Config echo for the manifest.
    pub fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::Format(format!("config echo: {e}")))
    }

    pub fn sample_path(&self) -> Result<NoisePath> {
        sample_path(&self.noise.spec(), self.solver.t_final, self.noise.steps)
    }
}

/// Scalar results and verdicts of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub epsilon: f64,
    pub n_points: usize,
    pub t_final: f64,
    pub total_steps: usize,
    pub s0: f64,
    pub s_drift: f64,
    /// Largest snapshot-to-snapshot increase of `S(y)`, relative to `S(y₀)`.
    pub max_s_increase: f64,
    /// `max_s_increase / (Δt + Δx)`, the constant the step tolerance needs.
    pub step_constant: f64,
    pub translation_error: Option<f64>,
    /// Smallest envelope constant the Gronwall and `L^q` verdicts need.
    pub required_constant: Option<f64>,
    pub accumulator: f64,
    pub pressure_floor: f64,
    pub max_abs_z: f64,
    pub entropy_worst: Option<f64>,
    pub ledger_error: Option<String>,
    pub verdicts: BTreeMap<String, bool>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "scenario {}  seed {}  eps {:e}  N {}  T {}  steps {}\n\
             S0 {:.6e}  S drift {:.3e}  max S increase {:.3e}  step constant {:.3e}\n\
             accumulator {:.4e}  pressure floor {:.2e}  max|z| {:.4e}\n",
            self.scenario,
            self.seed,
            self.epsilon,
            self.n_points,
            self.t_final,
            self.total_steps,
            self.s0,
            self.s_drift,
            self.max_s_increase,
            self.step_constant,
            self.accumulator,
            self.pressure_floor,
            self.max_abs_z,
        );
        if let Some(c) = self.required_constant {
            s += &format!("required envelope constant {c:.4e}\n");
        }
        if let Some(e) = self.translation_error {
            s += &format!("peakon translation L1 error {e:.4e}\n");
        }
        if let Some(e) = self.entropy_worst {
            s += &format!("worst entropy residual / tol {e:.4e}\n");
        }
        if let Some(e) = &self.ledger_error {
            s += &format!("ledger: {e}\n");
        }
        for (k, v) in &self.verdicts {
            s += &format!("{:<20} {}\n", k, if *v { "PASS" } else { "FAIL" });
        }
        s
    }
}

pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub trajectory: Trajectory,
    pub ledger: Option<EstimateLedger>,
    pub gronwall: Option<GronwallBound>,
    pub lq: Option<LqVerdict>,
    pub entropy: Vec<EntropyReport>,
    pub summary: RunSummary,
}

/// L¹ distance between `z` and the peakon `c e^{-|x - x₀ - ct|}`, wrapped periodically.
pub fn peakon_translation_error(z: &Field, c: f64, x0: f64, t: f64) -> f64 {
    let g = z.grid();
    let len = g.length();
    let centre = x0 + c * t;
    g.nodes()
        .zip(z.values())
        .map(|(x, v)| {
            let d = (x - centre).rem_euclid(len);
            let d = d.min(len - d);
            (v - c * (-d).exp()).abs()
        })
        .sum::<f64>()
        * g.dx()
}

/// Levels spanning the range of `z` over the whole trajectory.
pub fn entropy_levels(traj: &Trajectory, plan: &DiagnosticPlan) -> Result<Vec<f64>> {
    let lo = traj.snapshots.iter().map(|s| s.state.z.min()).fold(f64::INFINITY, f64::min);
    let hi = traj.snapshots.iter().map(|s| s.state.z.max()).fold(f64::NEG_INFINITY, f64::max);
    Ok(CGrid::spanning(lo, hi, plan.c_pad, plan.c_levels)?.levels())
}

fn run_with_path(config: &ScenarioConfig, path: &NoisePath) -> Result<RunOutcome> {
    let grid = config.grid.build()?;
    let z0 = initial_data(&config.initial, grid)?;
    let plan = &config.diagnostics;
    let t_final = config.solver.t_final;
    let traj = run_at(&z0, path, &config.solver, &uniform_times(t_final, plan.snapshots))?;

    let mut verdicts = BTreeMap::new();
    let floor = traj.pressure_floor();
    if config.solver.pressure_enabled && config.solver.helmholtz == HelmholtzBackend::Kernel {
        verdicts.insert("pressure_positivity".to_string(), floor >= -POSITIVITY_TOL);
    }

    let (mut ledger, mut gronwall, mut lq, mut ledger_error) = (None, None, None, None);
    let mut required = None;
    if plan.ledger {
        match EstimateLedger::from_trajectory(&traj, config.solver.q, plan.constant) {
            Ok(l) => {
                let g = estimates::gronwall_bound(&traj, &l)?;
                let v = estimates::lq_monitor(&l);
                required = Some(estimates::required_constant(&traj, &l)?);
                verdicts.insert("kernel_bounds".to_string(), true);
                verdicts.insert("gronwall".to_string(), g.verdict);
                verdicts.insert("lq".to_string(), v.verdict);
                gronwall = Some(g);
                lq = Some(v);
                ledger = Some(l);
            }
            Err(Error::EstimateViolation(msg)) => {
                verdicts.insert("kernel_bounds".to_string(), false);
                ledger_error = Some(msg);
            }
            Err(e) => return Err(e),
        }
    }

    let mut reports = Vec::new();
    let mut entropy_worst = None;
    if plan.entropy {
        let levels = entropy_levels(&traj, plan)?;
        let all = catalog(grid.half_length(), t_final);
        let phis: Vec<_> = plan.test_functions.iter().map(|&i| all[i]).collect();
        reports = entropy::entropy_sweep(&traj, &levels, &phis, plan.c_tol)?;
        entropy_worst = reports
            .iter()
            .map(|r| r.residual / r.tol)
            .min_by(|a, b| a.total_cmp(b));
        verdicts.insert("entropy".to_string(), reports.iter().all(|r| r.pass));
    }

    let (s0, s_drift, max_inc) = match &ledger {
        Some(l) => (l.rows[0].s_y, l.s_drift(), l.max_s_increase()),
        None => (0.0, 0.0, 0.0),
    };
    let dt_mean = t_final / traj.total_steps().max(1) as f64;
    let step_constant = max_inc / (dt_mean + grid.dx());
    if path.spec().is_zero() && ledger.is_some() {
        verdicts.insert("s_step".to_string(), step_constant <= STEP_TOL_CONSTANT);
    }
    let translation_error = match config.initial {
        InitialData::Peakon { c, x0 } if path.spec().is_zero() && config.solver.pressure_enabled => {
            Some(peakon_translation_error(&traj.last().z, c, x0, t_final))
        }
        _ => None,
    };
    let summary = RunSummary {
        scenario: config.name.clone(),
        seed: config.seed(),
        epsilon: config.solver.epsilon,
        n_points: grid.n_points(),
        t_final,
        total_steps: traj.total_steps(),
        s0,
        s_drift,
        max_s_increase: max_inc,
        step_constant,
        translation_error,
        required_constant: required,
        accumulator: traj.accumulator(),
        pressure_floor: floor,
        max_abs_z: traj.snapshots.iter().map(|s| s.state.z.max_abs()).fold(0.0, f64::max),
        entropy_worst,
        ledger_error,
        verdicts,
    };
    Ok(RunOutcome {
        config: config.clone(),
        trajectory: traj,
        ledger,
        gronwall,
        lq,
        entropy: reports,
        summary,
    })
}

/// Samples the path, runs the solver and evaluates the diagnostic plan.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutcome> {
    let inner = || {
        config.validate()?;
        run_with_path(config, &config.sample_path()?)
    };
    inner().map_err(|e| e.in_scenario(&config.name))
}

pub fn manifest_for(config: &ScenarioConfig, command: &str, threads: usize) -> Result<Manifest> {
    Ok(Manifest {
        scenario: config.name.clone(),
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed(),
        threads,
        verdicts: BTreeMap::new(),
        files: Vec::new(),
        config: config.to_table()?,
    })
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(format!("CSV: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Format(format!("CSV: {e}")))
}

/// Writes the ledger, entropy reports, bounds, field and path dumps of a run.
pub fn export_run(outcome: &RunOutcome, ex: &mut Exporter) -> Result<()> {
    if let Some(l) = &outcome.ledger {
        let mut buf = Vec::new();
        l.write_csv(&mut buf)?;
        ex.write("ledger.csv", &buf)?;
    }
    if let (Some(g), Some(lq)) = (&outcome.gronwall, &outcome.lq) {
        ex.write_text("bounds.txt", &estimates::bounds_report(&outcome.config.name, g, lq))?;
    }
    if !outcome.entropy.is_empty() {
        let mut buf = Vec::new();
        entropy::write_reports_csv(&outcome.entropy, &mut buf)?;
        ex.write("entropy.csv", &buf)?;
    }
    ex.write_text("summary.txt", &outcome.summary.text())?;
    let traj = &outcome.trajectory;
    ex.write("noise_path.sdpw", &traj.path.to_bytes())?;
    if outcome.config.diagnostics.dump_fields {
        for (m, s) in traj.snapshots.iter().enumerate() {
            ex.write_field(&format!("fields/z_{m:04}.sdpf"), &s.state.z, s.state.t)?;
        }
    } else {
        let last = traj.last();
        ex.write_field("z_final.sdpf", &last.z, last.t)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Epsilon,
    Mesh,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRun {
    pub label: String,
    pub epsilon: f64,
    pub n_points: usize,
    pub seed: u64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Distances between consecutive members on the central window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub from: String,
    pub to: String,
    /// `∫₀ᵀ ‖z_a - z_b‖_{L¹(window)} dt`
    pub l1: f64,
    /// `∫₀ᵀ ‖z_a - z_b‖_{L²(window)} dt`
    pub l2: f64,
    pub final_l1: f64,
    pub final_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub members: usize,
    pub t: f64,
    /// Pointwise mean of `u = z + W` at `t`.
    pub mean: Field,
    /// Pointwise sample variance of `u` at `t`.
    pub variance: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub scenario: String,
    pub kind: StudyKind,
    pub runs: Vec<StudyRun>,
    pub distances: Vec<DistanceRow>,
    /// `d_{i+1} / d_i` for the L¹ distances.
    pub ratios: Vec<f64>,
    pub mean_ratio: Option<f64>,
    /// Largest over smallest accumulator across the ladder.
    pub defect_band: Option<f64>,
    /// `∫∫ F / (|domain| · |z range|)` at the final time.
    pub cesaro_ratio: Option<f64>,
    pub ensemble: Option<EnsembleStats>,
    pub verdicts: BTreeMap<String, bool>,
}

impl StudyResult {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn text(&self) -> String {
        let mut s = format!("study {:?} of {}\n", self.kind, self.scenario);
        for r in &self.runs {
            match (&r.summary, &r.error) {
                (Some(sm), _) => {
                    s += &format!(
                        "  {:<14} acc {:.4e}  S drift {:.3e}  {}\n",
                        r.label,
                        sm.accumulator,
                        sm.s_drift,
                        if sm.passed() { "PASS" } else { "FAIL" }
                    )
                }
                (None, Some(e)) => s += &format!("  {:<14} error: {e}\n", r.label),
                (None, None) => {}
            }
        }
        for d in &self.distances {
            s += &format!("  d({}, {}) L1 {:.4e}  L2 {:.4e}\n", d.from, d.to, d.l1, d.l2);
        }
        if let Some(r) = self.mean_ratio {
            s += &format!("  mean contraction ratio {r:.4}\n");
        }
        if let Some(b) = self.defect_band {
            s += &format!("  defect mass band {b:.4}\n");
        }
        if let Some(c) = self.cesaro_ratio {
            s += &format!("  Cesaro F ratio {c:.4e}\n");
        }
        for (k, v) in &self.verdicts {
            s += &format!("{:<20} {}\n", k, if *v { "PASS" } else { "FAIL" });
        }
        s
    }
}

/// Window distances at matched snapshot times, integrated in time.
fn window_distance(a: &Trajectory, b: &Trajectory, window: f64) -> Result<(f64, f64, f64, f64)> {
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::Usage("members have different snapshot times".into()));
    }
    let ga = *a.grid();
    let gb = *b.grid();
    // compare on the coarser grid's nodes
    let (coarse, fine, swap) = if ga.n_points() <= gb.n_points() { (ga, gb, false) } else { (gb, ga, true) };
    if coarse.half_length() != fine.half_length() {
        return Err(Error::GridMismatch("members have different domains".into()));
    }
    let stride = fine.n_points() / coarse.n_points();
    let mask = coarse.central_window(window);
    let dx = coarse.dx();
    let mut per_time = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let (zc, zf) = if swap { (&sb.state.z, &sa.state.z) } else { (&sa.state.z, &sb.state.z) };
        let (mut l1, mut l2) = (0.0, 0.0);
        for (i, &inside) in mask.iter().enumerate() {
            if inside {
                let d = (zc.values()[i] - zf.values()[i * stride]).abs();
                l1 += d;
                l2 += d * d;
            }
        }
        per_time.push((sa.state.t, l1 * dx, (l2 * dx).sqrt()));
    }
    let (mut i1, mut i2) = (0.0, 0.0);
    for w in per_time.windows(2) {
        let h = w[1].0 - w[0].0;
        i1 += 0.5 * h * (w[0].1 + w[1].1);
        i2 += 0.5 * h * (w[0].2 + w[1].2);
    }
    let last = per_time.last().expect("snapshots");
    Ok((i1, i2, last.1, last.2))
}

fn distances_and_ratios(
    labels: &[String],
    trajs: &[&Trajectory],
    window: f64,
) -> Result<(Vec<DistanceRow>, Vec<f64>, Option<f64>)> {
    let mut rows = Vec::new();
    for i in 0..trajs.len().saturating_sub(1) {
        let (l1, l2, f1, f2) = window_distance(trajs[i], trajs[i + 1], window)?;
        rows.push(DistanceRow {
            from: labels[i].clone(),
            to: labels[i + 1].clone(),
            l1,
            l2,
            final_l1: f1,
            final_l2: f2,
        });
    }
    let ratios: Vec<f64> = rows
        .windows(2)
        .map(|w| if w[0].l1 > 0.0 { w[1].l1 / w[0].l1 } else { 0.0 })
        .collect();
    let mean = if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    };
    Ok((rows, ratios, mean))
}

/// `∫∫ F` of the final kinetic fields over the band measure `|domain| · (max z - min z)`.
pub fn cesaro_ratio(fields: &[&Field], levels: usize) -> Result<f64> {
    let lo = fields.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
    let hi = fields.iter().map(|f| f.max()).fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return Ok(0.0);
    }
    let dc = range / levels as f64;
    let cg = CGrid::new(lo - 1.5 * dc, dc, levels + 4)?;
    let kin = fields
        .iter()
        .map(|z| entropy::kinetic_field(z, cg))
        .collect::<Result<Vec<_>>>()?;
    let f = entropy::cesaro_f(&kin)?;
    Ok(f.integral() / (fields[0].grid().length() * range))
}

fn study_run(label: String, config: &ScenarioConfig, res: &Result<RunOutcome>) -> StudyRun {
    StudyRun {
        label,
        epsilon: config.solver.epsilon,
        n_points: config.grid.n_points,
        seed: config.seed(),
        summary: res.as_ref().ok().map(|o| o.summary.clone()),
        error: res.as_ref().err().map(|e| e.to_string()),
    }
}

fn members_pass(runs: &[StudyRun]) -> bool {
    runs.iter().all(|r| r.summary.as_ref().is_some_and(|s| s.passed()))
}

/// Runs the ε-ladder on one shared noise path.
pub fn epsilon_study(config: &ScenarioConfig, ladder: &[f64]) -> Result<StudyResult> {
    if ladder.is_empty() {
        return Err(Error::Usage("empty ε ladder".into()));
    }
    if ladder.windows(2).any(|w| w[1] > w[0]) || ladder.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Usage("ε ladder must be nonnegative and decreasing".into()));
    }
    config.validate().map_err(|e| e.in_scenario(&config.name))?;
    let path = config.sample_path()?;
    let configs: Vec<ScenarioConfig> = ladder
        .iter()
        .map(|&eps| {
            let mut c = config.clone();
            c.solver.epsilon = eps;
            c
        })
        .collect();
    let outcomes: Vec<Result<RunOutcome>> = configs
        .par_iter()
        .map(|c| run_with_path(c, &path).map_err(|e| e.in_scenario(&c.name)))
        .collect();
    let labels: Vec<String> = ladder.iter().map(|e| format!("eps={e:e}")).collect();
    let runs: Vec<StudyRun> = labels
        .iter()
        .zip(&configs)
        .zip(&outcomes)
        .map(|((l, c), o)| study_run(l.clone(), c, o))
        .collect();
    let mut verdicts = BTreeMap::new();
    verdicts.insert("members".to_string(), members_pass(&runs));
    let mut result = StudyResult {
        scenario: config.name.clone(),
        kind: StudyKind::Epsilon,
        runs,
        distances: Vec::new(),
        ratios: Vec::new(),
        mean_ratio: None,
        defect_band: None,
        cesaro_ratio: None,
        ensemble: None,
        verdicts,
    };
    let ok: Vec<&RunOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    if ok.len() != outcomes.len() {
        return Ok(result);
    }
    let trajs: Vec<&Trajectory> = ok.iter().map(|o| &o.trajectory).collect();
    let (rows, ratios, mean) = distances_and_ratios(&labels, &trajs, config.diagnostics.window)?;
    result.distances = rows;
    result.ratios = ratios;
    result.mean_ratio = mean;
    if let Some(m) = mean {
        result.verdicts.insert("cauchy".to_string(), m < 1.0);
    }
    let masses: Vec<f64> = trajs
        .iter()
        .filter(|t| t.config.epsilon > 0.0)
        .map(|t| t.accumulator())
        .collect();
    if masses.len() >= 2 {
        let hi = masses.iter().cloned().fold(0.0, f64::max);
        let lo = masses.iter().cloned().fold(f64::INFINITY, f64::min);
        let band = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        result.defect_band = Some(band);
        result.verdicts.insert("defect_band".to_string(), band <= 4.0);
    }
    let finals: Vec<&Field> = trajs.iter().map(|t| &t.last().z).collect();
    let cr = cesaro_ratio(&finals, config.study.cesaro_levels)?;
    result.cesaro_ratio = Some(cr);
    result.verdicts.insert("cesaro".to_string(), cr <= 0.05);
    Ok(result)
}

/// Runs the scenario on each mesh against one noise path.
pub fn mesh_study(config: &ScenarioConfig, meshes: &[usize]) -> Result<StudyResult> {
    if meshes.is_empty() || meshes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("mesh ladder must be nonempty and increasing".into()));
    }
    if matches!(config.initial, InitialData::File { .. }) {
        return Err(Error::Usage("mesh studies need analytic initial data".into()));
    }
    let configs: Vec<ScenarioConfig> = meshes
        .iter()
        .map(|&n| {
            let mut c = config.clone();
            c.grid.n_points = n;
            c
        })
        .collect();
    for c in &configs {
        c.validate().map_err(|e| e.in_scenario(&c.name))?;
    }
    let path = config.sample_path()?;
    let outcomes: Vec<Result<RunOutcome>> = configs
        .par_iter()
        .map(|c| run_with_path(c, &path).map_err(|e| e.in_scenario(&c.name)))
        .collect();
    let labels: Vec<String> = meshes.iter().map(|n| format!("N={n}")).collect();
    let runs: Vec<StudyRun> = labels
        .iter()
        .zip(&configs)
        .zip(&outcomes)
        .map(|((l, c), o)| study_run(l.clone(), c, o))
        .collect();
    let mut verdicts = BTreeMap::new();
    verdicts.insert("members".to_string(), members_pass(&runs));
    let mut result = StudyResult {
        scenario: config.name.clone(),
        kind: StudyKind::Mesh,
        runs,
        distances: Vec::new(),
        ratios: Vec::new(),
        mean_ratio: None,
        defect_band: None,
        cesaro_ratio: None,
        ensemble: None,
        verdicts,
    };
    let ok: Vec<&RunOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    if ok.len() == outcomes.len() {
        let trajs: Vec<&Trajectory> = ok.iter().map(|o| &o.trajectory).collect();
        let (rows, ratios, mean) = distances_and_ratios(&labels, &trajs, config.diagnostics.window)?;
        result.distances = rows;
        result.ratios = ratios;
        result.mean_ratio = mean;
        if let Some(m) = mean {
            result.verdicts.insert("cauchy".to_string(), m < 1.0);
        }
    }
    Ok(result)
}

/// Seed of ensemble member `m`; member 0 keeps the scenario's seed.
pub fn member_seed(base: u64, member: usize) -> u64 {
    if member == 0 {
        base
    } else {
        derive_seed(base, member as u64)
    }
}

/// Runs `n` independent noise paths and aggregates `u = z + W` at `T`.
pub fn ensemble(config: &ScenarioConfig, n: usize) -> Result<StudyResult> {
    if n == 0 {
        return Err(Error::Usage("ensemble needs at least one member".into()));
    }
    config.validate().map_err(|e| e.in_scenario(&config.name))?;
    let base = config.seed();
    let results: Vec<(StudyRun, Option<Field>)> = (0..n)
        .into_par_iter()
        .map(|m| {
            let c = config.clone().with_seed(member_seed(base, m));
            let out = run_scenario(&c);
            let u = out.as_ref().ok().map(|o| o.trajectory.last().u());
            (study_run(format!("member={m}"), &c, &out), u)
        })
        .collect();
    let (runs, finals): (Vec<StudyRun>, Vec<Option<Field>>) = results.into_iter().unzip();
    let finals: Vec<Field> = finals.into_iter().flatten().collect();
    let mut verdicts = BTreeMap::new();
    verdicts.insert("members".to_string(), members_pass(&runs));
    let stats = if finals.is_empty() {
        None
    } else {
        let grid = *finals[0].grid();
        let k = finals.len() as f64;
        let npts = grid.n_points();
        // deviations from the first member keep identical members exactly at zero variance
        let base = finals[0].values();
        let mut shift = vec![0.0; npts];
        for f in &finals[1..] {
            for ((s, v), b) in shift.iter_mut().zip(f.values()).zip(base) {
                *s += v - b;
            }
        }
        shift.iter_mut().for_each(|s| *s /= k);
        let mut var = vec![0.0; npts];
        if finals.len() > 1 {
            for f in &finals {
                for (((s, v), b), m) in var.iter_mut().zip(f.values()).zip(base).zip(&shift) {
                    let d = v - b - m;
                    *s += d * d / (k - 1.0);
                }
            }
        }
        let mean: Vec<f64> = base.iter().zip(&shift).map(|(b, m)| b + m).collect();
        Some(EnsembleStats {
            members: finals.len(),
            t: config.solver.t_final,
            mean: Field::new(grid, mean)?,
            variance: Field::new(grid, var)?,
        })
    };
    Ok(StudyResult {
        scenario: config.name.clone(),
        kind: StudyKind::Ensemble,
        runs,
        distances: Vec::new(),
        ratios: Vec::new(),
        mean_ratio: None,
        defect_band: None,
        cesaro_ratio: None,
        ensemble: stats,
        verdicts,
    })
}

#[derive(Serialize)]
struct RunRow<'a> {
    label: &'a str,
    epsilon: f64,
    n_points: usize,
    seed: u64,
    total_steps: Option<usize>,
    accumulator: Option<f64>,
    s_drift: Option<f64>,
    max_abs_z: Option<f64>,
    pressure_floor: Option<f64>,
    passed: bool,
    error: &'a str,
}

#[derive(Serialize)]
struct EnsembleRow {
    x: f64,
    mean: f64,
    variance: f64,
}

pub fn export_study(result: &StudyResult, ex: &mut Exporter) -> Result<()> {
    let rows: Vec<RunRow> = result
        .runs
        .iter()
        .map(|r| {
            let s = r.summary.as_ref();
            RunRow {
                label: &r.label,
                epsilon: r.epsilon,
                n_points: r.n_points,
                seed: r.seed,
                total_steps: s.map(|s| s.total_steps),
                accumulator: s.map(|s| s.accumulator),
                s_drift: s.map(|s| s.s_drift),
                max_abs_z: s.map(|s| s.max_abs_z),
                pressure_floor: s.map(|s| s.pressure_floor),
                passed: s.is_some_and(|s| s.passed()),
                error: r.error.as_deref().unwrap_or(""),
            }
        })
        .collect();
    ex.write("runs.csv", &csv_bytes(&rows)?)?;
    if !result.distances.is_empty() {
        ex.write("distances.csv", &csv_bytes(&result.distances)?)?;
    }
    if let Some(st) = &result.ensemble {
        let rows: Vec<EnsembleRow> = st
            .mean
            .grid()
            .nodes()
            .zip(st.mean.values().iter().zip(st.variance.values()))
            .map(|(x, (m, v))| EnsembleRow {
                x,
                mean: *m,
                variance: *v,
            })
            .collect();
        ex.write("ensemble.csv", &csv_bytes(&rows)?)?;
        ex.write_field("mean.sdpf", &st.mean, st.t)?;
        ex.write_field("variance.sdpf", &st.variance, st.t)?;
    }
    ex.write_text("summary.txt", &result.text())?;
    Ok(())
}

/// Smearing width of the Dirac in the defect mass, in cells.
pub const SMEAR_CELLS: f64 = 2.0;

/// Kruzkov and half-entropy sweeps over one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCheck {
    pub scenario: String,
    pub c_tol: f64,
    pub levels: Vec<f64>,
    pub kruzkov: Vec<EntropyReport>,
    pub plus: Vec<EntropyReport>,
    pub minus: Vec<EntropyReport>,
    /// Smallest `C_tol` under which every Kruzkov report passes.
    pub required_c_tol: f64,
    pub verdicts: BTreeMap<String, bool>,
}

impl EntropyCheck {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn text(&self) -> String {
        let worst = |r: &[EntropyReport]| {
            r.iter()
                .min_by(|a, b| (a.residual / a.tol).total_cmp(&(b.residual / b.tol)))
                .map(|w| format!("residual/tol {:.3} at c = {:.4}, phi {}", w.residual / w.tol, w.c, w.phi_id))
                .unwrap_or_default()
        };
        let mut s = format!(
            "entropy check of {}\n  levels {}  C_tol {}  required C_tol {:.4}\n",
            self.scenario,
            self.levels.len(),
            self.c_tol,
            self.required_c_tol
        );
        s += &format!("  kruzkov worst {}\n", worst(&self.kruzkov));
        s += &format!("  half+   worst {}\n", worst(&self.plus));
        s += &format!("  half-   worst {}\n", worst(&self.minus));
        for (k, v) in &self.verdicts {
            s += &format!("{:<20} {}\n", k, if *v { "PASS" } else { "FAIL" });
        }
        s
    }
}

/// Runs the scenario once and sweeps Kruzkov and both half entropies over
/// the planned levels and test functions.
pub fn entropy_check(config: &ScenarioConfig) -> Result<EntropyCheck> {
    let mut cfg = config.clone();
    cfg.diagnostics.entropy = false;
    cfg.diagnostics.ledger = false;
    let inner = || {
        cfg.validate()?;
        let traj = run_with_path(&cfg, &cfg.sample_path()?)?.trajectory;
        let plan = &cfg.diagnostics;
        let levels = entropy_levels(&traj, plan)?;
        let all = catalog(traj.grid().half_length(), cfg.solver.t_final);
        let phis: Vec<_> = plan.test_functions.iter().map(|&i| all[i]).collect();
        let smear = SMEAR_CELLS * traj.grid().dx();
        let kruzkov = entropy::entropy_sweep(&traj, &levels, &phis, plan.c_tol)?;
        let plus = entropy::half_entropy_sweep(&traj, &levels, &phis, HalfSign::Plus, smear, plan.c_tol)?;
        let minus = entropy::half_entropy_sweep(&traj, &levels, &phis, HalfSign::Minus, smear, plan.c_tol)?;
        let mut verdicts = BTreeMap::new();
        verdicts.insert("kruzkov".to_string(), kruzkov.iter().all(|r| r.pass));
        verdicts.insert("half_plus".to_string(), plus.iter().all(|r| r.pass));
        verdicts.insert("half_minus".to_string(), minus.iter().all(|r| r.pass));
        Ok(EntropyCheck {
            scenario: cfg.name.clone(),
            c_tol: plan.c_tol,
            required_c_tol: entropy::required_c_tol(&kruzkov, plan.c_tol),
            levels,
            kruzkov,
            plus,
            minus,
            verdicts,
        })
    };
    inner().map_err(|e: Error| e.in_scenario(&config.name))
}

pub fn export_entropy_check(check: &EntropyCheck, ex: &mut Exporter) -> Result<()> {
    for (name, reports) in [("kruzkov.csv", &check.kruzkov), ("half_plus.csv", &check.plus), ("half_minus.csv", &check.minus)] {
        let mut buf = Vec::new();
        entropy::write_reports_csv(reports, &mut buf)?;
        ex.write(name, &buf)?;
    }
    ex.write_text("summary.txt", &check.text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_norm;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig::from_toml_str(
            r#"
name = "tiny"
[grid]
half_length = 4.0
n_points = 64
[solver]
t_final = 0.2
[initial]
kind = "sine"
amplitude = 0.0
wavenumber = 1.0
[diagnostics]
snapshots = 4
"#,
            &[],
        )
        .unwrap()
    }

    #[test]
    fn shipped_scenarios_parse() {
        for (name, _) in BUILTIN_SCENARIOS {
            let c = ScenarioConfig::builtin(name).unwrap();
            assert_eq!(&c.name, name);
        }
    }

    #[test]
    fn defaults_fill_in() {
        let c = tiny();
        assert_eq!(c.diagnostics.c_levels, 41);
        assert_eq!(c.diagnostics.test_functions.len(), 6);
        assert_eq!(c.study.epsilons, vec![1e-2, 3e-3, 1e-3, 3e-4]);
        assert_eq!(c.solver.q, 2.5);
        assert_eq!(c.noise.steps, 64);
    }

    #[test]
    fn overrides() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "solver.epsilon=1e-3").unwrap();
        apply_override(&mut t, "name = hello").unwrap();
        apply_override(&mut t, "study.epsilons=[0.1, 0.01]").unwrap();
        assert_eq!(t["solver"]["epsilon"].as_float(), Some(1e-3));
        assert_eq!(t["name"].as_str(), Some("hello"));
        assert_eq!(t["study"]["epsilons"].as_array().unwrap().len(), 2);
        assert!(apply_override(&mut t, "noequals").is_err());
        assert!(apply_override(&mut t, "name.x=1").is_err());
        let text = toml::to_string(&tiny()).unwrap();
        let c = ScenarioConfig::from_toml_str(&text, &["grid.n_points=128".into()]).unwrap();
        assert_eq!(c.grid.n_points, 128);
        assert!(ScenarioConfig::from_toml_str(&text, &["grid.n_points=100".into()]).is_err());
        assert!(ScenarioConfig::from_toml_str(&text, &["solver.bogus=1".into()]).is_err());
    }

    #[test]
    fn peakon_values() {
        // L = 20 leaves e^{-20} at the boundary, above the admissible 1e-10
        assert!(initial_data(&InitialData::Peakon { c: 1.0, x0: 0.0 }, Grid::new(20.0, 4096).unwrap()).is_err());
        let fine = Grid::new(24.0, 32768).unwrap();
        let p = initial_data(&InitialData::Peakon { c: 1.0, x0: 0.0 }, fine).unwrap();
        assert_eq!(p.values()[16384], 1.0);
        // ∫ e^{-2|x|} = 1; the kink costs Δx²/6 in the rectangle rule
        let norm = lp_norm(&p, 2.0).unwrap();
        assert!((norm - 1.0).abs() < 1e-6, "{norm}");
        let pair = initial_data(&InitialData::AntipeakonPair { c: 1.0, separation: 3.0 }, Grid::new(26.0, 4096).unwrap()).unwrap();
        for i in 1..2048 {
            assert!((pair.values()[2048 + i] + pair.values()[2048 - i]).abs() < 1e-15);
        }
        let narrow = Grid::new(10.0, 256).unwrap();
        assert!(matches!(
            initial_data(&InitialData::Peakon { c: 1.0, x0: 0.0 }, narrow),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_scenario_is_quiet() {
        let out = run_scenario(&tiny()).unwrap();
        assert!(out.summary.passed(), "{}", out.summary.text());
        assert_eq!(out.summary.accumulator, 0.0);
        assert_eq!(out.summary.max_abs_z, 0.0);
        let worst = out.entropy.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-14, "{worst}");
        for row in &out.ledger.as_ref().unwrap().rows {
            assert_eq!(row.s_y, 0.0);
            assert_eq!(row.p_linf, 0.0);
        }
    }

    #[test]
    fn translation_error_of_exact_peakon() {
        let g = Grid::new(30.0, 8192).unwrap();
        let z = Field::from_fn(g, |x| (-(x - 1.5).abs()).exp()).unwrap();
        assert!(peakon_translation_error(&z, 1.0, 0.0, 1.5) < 1e-12);
        // wrapped across the boundary
        let z = Field::from_fn(g, |x| {
            let d = (x - 29.0).abs().min(60.0 - (x - 29.0).abs());
            (-d).exp()
        })
        .unwrap();
        assert!(peakon_translation_error(&z, 1.0, 27.0, 2.0) < 1e-12);
    }

    #[test]
    fn identical_ladder_has_zero_distances() {
        let mut c = tiny();
        c.initial = InitialData::Sine {
            amplitude: 0.3,
            wavenumber: 1.0,
        };
        let r = epsilon_study(&c, &[1e-3, 1e-3, 1e-3]).unwrap();
        assert!(r.distances.iter().all(|d| d.l1 == 0.0 && d.l2 == 0.0));
        assert!(epsilon_study(&c, &[1e-3, 1e-2]).is_err());
    }

    #[test]
    fn single_member_ensemble_matches_run() {
        let mut c = tiny();
        c.noise.modes = vec![NoiseMode {
            amplitude: 0.1,
            shape: crate::noise::ModeShape::Gaussian { center: 0.0, width: 0.5 },
        }];
        c.noise.seed = 11;
        let run = run_scenario(&c).unwrap();
        let ens = ensemble(&c, 1).unwrap();
        assert_eq!(ens.runs[0].summary.as_ref().unwrap(), &run.summary);
        assert_eq!(ens.ensemble.as_ref().unwrap().mean, run.trajectory.last().u());
        assert_eq!(ens.ensemble.unwrap().variance.max_abs(), 0.0);
    }

    #[test]
    fn zero_noise_ensemble_has_no_variance() {
        let mut c = tiny();
        c.initial = InitialData::Sine {
            amplitude: 0.3,
            wavenumber: 1.0,
        };
        let ens = ensemble(&c, 3).unwrap();
        assert_eq!(ens.ensemble.unwrap().variance.max_abs(), 0.0);
    }
}
