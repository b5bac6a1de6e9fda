//! Entropy residuals, the viscous defect measure and the kinetic lift.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::stepper::{Snapshot, Trajectory};

/// Temporal factor of a test function; both vanish at `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalProfile {
    /// `cos²(πt / 2T)`
    CosSquared,
    /// `1 - t/T`
    Linear,
}

/// `φ(t, x) = a θ(t) b((x - x_c)/r)` with `b(s) = (1 - s²)³` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub id: usize,
    pub center: f64,
    pub radius: f64,
    pub t_final: f64,
    pub temporal: TemporalProfile,
    pub amplitude: f64,
}

/// `max |b'| = (6/√5)(4/5)²`, attained at `s² = 1/5`.
const BUMP_SLOPE: f64 = 1.717_300_206_719_838_6;

impl TestFunction {
    pub fn new(id: usize, center: f64, radius: f64, t_final: f64, temporal: TemporalProfile) -> Result<Self> {
        if !(radius > 0.0 && t_final > 0.0) {
            return Err(Error::Config("test function needs positive radius and horizon".into()));
        }
        Ok(TestFunction {
            id,
            center,
            radius,
            t_final,
            temporal,
            amplitude: 1.0,
        })
    }

    /// The zero test function.
    pub fn zero(t_final: f64) -> Self {
        TestFunction {
            id: usize::MAX,
            center: 0.0,
            radius: 1.0,
            t_final,
            temporal: TemporalProfile::Linear,
            amplitude: 0.0,
        }
    }

    fn theta(&self, t: f64) -> (f64, f64) {
        let tf = self.t_final;
        match self.temporal {
            TemporalProfile::CosSquared => {
                let a = std::f64::consts::PI / (2.0 * tf);
                let c = (a * t).cos();
                (c * c, -a * (2.0 * a * t).sin())
            }
            TemporalProfile::Linear => (1.0 - t / tf, -1.0 / tf),
        }
    }

    fn bump(&self, x: f64) -> (f64, f64) {
        let s = (x - self.center) / self.radius;
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let w = 1.0 - s * s;
        (w * w * w, -6.0 * s * w * w / self.radius)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.amplitude * self.theta(t).0 * self.bump(x).0
    }

    /// `(φ, ∂t φ, ∂x φ)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (th, dth) = self.theta(t);
        let (b, db) = self.bump(x);
        let a = self.amplitude;
        (a * th * b, a * dth * b, a * th * db)
    }

    /// `‖φ‖∞ + ‖∂t φ‖∞ + ‖∂x φ‖∞`.
    pub fn w1_inf_norm(&self) -> f64 {
        let dt = match self.temporal {
            TemporalProfile::CosSquared => std::f64::consts::PI / (2.0 * self.t_final),
            TemporalProfile::Linear => 1.0 / self.t_final,
        };
        self.amplitude.abs() * (1.0 + dt + BUMP_SLOPE / self.radius)
    }

    /// Whether the spatial support lies strictly inside `[-L, L)`.
    pub fn fits(&self, grid: &Grid) -> bool {
        let l = grid.half_length();
        self.center - self.radius > -l && self.center + self.radius < l
    }
}

/// The six shipped test functions, placed relative to the half-length.
pub fn catalog(half_length: f64, t_final: f64) -> Vec<TestFunction> {
    let l = half_length;
    let placements = [
        (0.0, 0.25 * l, TemporalProfile::CosSquared),
        (0.0, 0.5 * l, TemporalProfile::Linear),
        (-0.3 * l, 0.2 * l, TemporalProfile::CosSquared),
        (0.3 * l, 0.2 * l, TemporalProfile::CosSquared),
        (0.15 * l, 0.35 * l, TemporalProfile::Linear),
        (-0.1 * l, 0.6 * l, TemporalProfile::CosSquared),
    ];
    placements
        .iter()
        .enumerate()
        .map(|(id, &(c, r, prof))| TestFunction::new(id, c, r, t_final, prof).expect("positive radius"))
        .collect()
}

/// Entropy tolerance constant, calibrated on the Burgers Riemann oracle.
pub const DEFAULT_C_TOL: f64 = 0.03;

/// `C_tol (Δx + Δt) (1 + c²) ‖φ‖_{W^{1,∞}}`.
pub fn tolerance(c_tol: f64, dx: f64, dt: f64, c: f64, phi: &TestFunction) -> f64 {
    c_tol * (dx + dt) * (1.0 + c * c) * phi.w1_inf_norm()
}

/// Largest spacing between consecutive snapshots.
pub fn snapshot_spacing(traj: &Trajectory) -> f64 {
    traj.snapshots
        .windows(2)
        .map(|w| w[1].state.t - w[0].state.t)
        .fold(0.0, f64::max)
}

fn check_phi(traj: &Trajectory, phi: &TestFunction) -> Result<()> {
    if (phi.t_final - traj.config.t_final).abs() > 1e-9 * traj.config.t_final {
        return Err(Error::Usage(format!(
            "test function horizon {} differs from the run horizon {}",
            phi.t_final, traj.config.t_final
        )));
    }
    if traj.snapshots.len() < 2 {
        return Err(Error::Usage("entropy quadrature needs at least two snapshots".into()));
    }
    Ok(())
}

/// Trapezoid rule in time over the snapshots of `f(snapshot)`.
fn time_integral(snaps: &[Snapshot], f: impl Fn(&Snapshot) -> f64) -> f64 {
    let vals: Vec<f64> = snaps.iter().map(&f).collect();
    snaps
        .windows(2)
        .zip(vals.windows(2))
        .map(|(s, v)| 0.5 * (s[1].state.t - s[0].state.t) * (v[0] + v[1]))
        .sum()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Which entropy `η` is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyKind {
    /// `|z - c|`
    Kruzkov,
    /// `|z - c|₊`
    Plus,
    /// `|z - c|₋`
    Minus,
}

impl EntropyKind {
    /// `(η(z), η'(z))` with the derivative 0 at `z = c`.
    fn eval(self, z: f64, c: f64) -> (f64, f64) {
        let d = z - c;
        match self {
            EntropyKind::Kruzkov => (d.abs(), sign(d)),
            EntropyKind::Plus => (d.max(0.0), if d > 0.0 { 1.0 } else { 0.0 }),
            EntropyKind::Minus => ((-d).max(0.0), if d < 0.0 { -1.0 } else { 0.0 }),
        }
    }
}

/// Flux and source part of the weak entropy form at one snapshot:
/// `∫ η'(z)[(z²-c²)/2 + (z-c)W] φ_x - η'(z)(∂x p + W ∂xW + c ∂xW) φ dx`.
fn entropy_integrand(snap: &Snapshot, c: f64, phi: &TestFunction, kind: EntropyKind) -> f64 {
    let s = &snap.state;
    let g = s.grid();
    let t = s.t;
    let n = g.n_points();
    let dx = g.dx();
    let (z, w, dw, dp) = (s.z.values(), s.w.values(), s.dw.values(), s.pressure.dp.values());
    let ph: Vec<f64> = g.nodes().map(|x| phi.value(t, x)).collect();
    let deta: Vec<f64> = z.iter().map(|&v| kind.eval(v, c).1).collect();
    let mut flux_sum = 0.0;
    let mut source_sum = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        // centred difference of φ, so that a constant flux sums to zero exactly
        let ph_x = (ph[j] - ph[(i + n - 1) % n]) / (2.0 * dx);
        flux_sum += deta[i] * (0.5 * (z[i] * z[i] - c * c) + (z[i] - c) * w[i]) * ph_x;
        if ph[i] == 0.0 && ph[j] == 0.0 {
            continue;
        }
        // η'(z) jumps where z crosses c: integrate the source over [x_i, x_{i+1}]
        // with z and the coefficient linear, split at the crossing
        let gi = (dp[i] + w[i] * dw[i] + c * dw[i]) * ph[i];
        let gj = (dp[j] + w[j] * dw[j] + c * dw[j]) * ph[j];
        let (ai, aj) = (z[i] - c, z[j] - c);
        source_sum += if ai * aj < 0.0 {
            let th = ai / (ai - aj);
            let gc = gi + th * (gj - gi);
            th * deta[i] * (gi + gc) + (1.0 - th) * deta[j] * (gc + gj)
        } else {
            deta[i] * gi + deta[j] * gj
        };
    }
    (flux_sum - 0.5 * source_sum) * dx
}

/// `∫∫ η φ_t + ∫ η(z₀) φ(0)`, with `φ_t` replaced by the difference of `φ`
/// over each snapshot interval and `η` averaged over its ends. A state that
/// does not move contributes exactly `η (φ(T) - φ(0)) + η φ(0) = 0`.
fn time_terms(traj: &Trajectory, c: f64, phi: &TestFunction, kind: EntropyKind) -> f64 {
    let g = *traj.grid();
    let nodes: Vec<f64> = g.nodes().collect();
    let snaps = &traj.snapshots;
    let eta = |s: &Snapshot, i: usize| kind.eval(s.state.z.values()[i], c).0;
    let mut sum = 0.0;
    for (i, &x) in nodes.iter().enumerate() {
        let s0 = &snaps[0];
        let mut acc = eta(s0, i) * phi.value(s0.state.t, x);
        for w in snaps.windows(2) {
            let dphi = phi.value(w[1].state.t, x) - phi.value(w[0].state.t, x);
            acc += 0.5 * (eta(&w[0], i) + eta(&w[1], i)) * dphi;
        }
        sum += acc;
    }
    sum * g.dx()
}

/// Kruzkov residual of the entropy inequality; nonnegative for entropy solutions.
pub fn kruzkov_residual(traj: &Trajectory, c: f64, phi: &TestFunction) -> Result<f64> {
    check_phi(traj, phi)?;
    let body = time_integral(&traj.snapshots, |s| entropy_integrand(s, c, phi, EntropyKind::Kruzkov));
    Ok(body + time_terms(traj, c, phi, EntropyKind::Kruzkov))
}

/// Which half-entropy is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfSign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    pub c: f64,
    pub phi_id: usize,
    pub residual: f64,
    pub defect_mass: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Left side of the viscous half-entropy balance and the defect mass it should equal.
///
/// The balance is `∫∫ η φ_t + q φ_x + src φ - ε ∂x η φ_x + ∫ η₀ φ(0) = m_ε(φ)`
/// with `m_ε(φ) = ε ∫∫ |∂x z|² δ(z - c) φ`, the Dirac smeared as a top-hat of
/// width `smear`. Gradients are one-sided differences on cells `[x_i, x_{i+1}]`,
/// and the smeared Dirac is integrated exactly over each cell with `z` linear there.
pub fn half_entropy_residual(
    traj: &Trajectory,
    c: f64,
    phi: &TestFunction,
    half: HalfSign,
    smear: f64,
    c_tol: f64,
) -> Result<EntropyReport> {
    check_phi(traj, phi)?;
    let eps = traj.config.epsilon;
    if eps > 0.0 && traj.snapshots.iter().skip(1).all(|s| s.dissipation.is_empty()) {
        return Err(Error::Usage("trajectory carries no gradient data".into()));
    }
    if !(smear > 0.0) {
        return Err(Error::Usage("smearing width must be positive".into()));
    }
    let kind = match half {
        HalfSign::Plus => EntropyKind::Plus,
        HalfSign::Minus => EntropyKind::Minus,
    };
    let grid = *traj.grid();
    let dx = grid.dx();
    let n = grid.n_points();
    let mids: Vec<f64> = (0..n).map(|i| grid.x(i) + 0.5 * dx).collect();

    let viscous = |snap: &Snapshot| -> (f64, f64) {
        if eps == 0.0 {
            return (0.0, 0.0);
        }
        let s = &snap.state;
        let z = s.z.values();
        let mut flux_term = 0.0;
        let mut mass = 0.0;
        let nodal: Vec<f64> = grid.nodes().map(|x| phi.value(s.t, x)).collect();
        for i in 0..n {
            let ph = phi.value(s.t, mids[i]);
            let ph_x = (nodal[(i + 1) % n] - nodal[i]) / dx;
            if ph == 0.0 && ph_x == 0.0 {
                continue;
            }
            let zr = z[(i + 1) % n];
            let dz = (zr - z[i]) / dx;
            let deta = (kind.eval(zr, c).0 - kind.eval(z[i], c).0) / dx;
            flux_term += deta * ph_x;
            // z linear on the cell: ∫ |∂x z|² δ(z - c) dx = |∂x z| · overlap / smear
            let (a, b) = if z[i] < zr { (z[i], zr) } else { (zr, z[i]) };
            let overlap = (b.min(c + 0.5 * smear) - a.max(c - 0.5 * smear)).max(0.0);
            if overlap > 0.0 {
                mass += dz.abs() * overlap * ph / (smear * dx);
            }
        }
        (-eps * flux_term * dx, eps * mass * dx)
    };

    let lhs = time_integral(&traj.snapshots, |s| entropy_integrand(s, c, phi, kind) + viscous(s).0)
        + time_terms(traj, c, phi, kind);
    let mass = time_integral(&traj.snapshots, |s| viscous(s).1);
    let tol = tolerance(c_tol, dx, snapshot_spacing(traj), c, phi);
    Ok(EntropyReport {
        c,
        phi_id: phi.id,
        residual: lhs,
        defect_mass: mass,
        tol,
        pass: lhs >= -tol,
    })
}

/// Kruzkov residuals for every `(c, φ)` pair, evaluated in parallel.
pub fn entropy_sweep(
    traj: &Trajectory,
    cs: &[f64],
    phis: &[TestFunction],
    c_tol: f64,
) -> Result<Vec<EntropyReport>> {
    let dx = traj.grid().dx();
    let dt = snapshot_spacing(traj);
    let pairs: Vec<(f64, &TestFunction)> = phis
        .iter()
        .flat_map(|phi| cs.iter().map(move |&c| (c, phi)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(c, phi)| {
            let residual = kruzkov_residual(traj, c, phi)?;
            let tol = tolerance(c_tol, dx, dt, c, phi);
            Ok(EntropyReport {
                c,
                phi_id: phi.id,
                residual,
                defect_mass: 0.0,
                tol,
                pass: residual >= -tol,
            })
        })
        .collect()
}

/// Half-entropy balances for every `(c, φ)` pair, evaluated in parallel.
pub fn half_entropy_sweep(
    traj: &Trajectory,
    cs: &[f64],
    phis: &[TestFunction],
    half: HalfSign,
    smear: f64,
    c_tol: f64,
) -> Result<Vec<EntropyReport>> {
    let pairs: Vec<(f64, &TestFunction)> = phis
        .iter()
        .flat_map(|phi| cs.iter().map(move |&c| (c, phi)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(c, phi)| half_entropy_residual(traj, c, phi, half, smear, c_tol))
        .collect()
}

/// Smallest `C_tol` for which every report in a sweep passes.
pub fn required_c_tol(reports: &[EntropyReport], c_tol_used: f64) -> f64 {
    reports
        .iter()
        .map(|r| {
            let unit = r.tol / c_tol_used;
            (-r.residual / unit).max(0.0)
        })
        .fold(0.0, f64::max)
}

pub fn write_reports_csv<W: Write>(reports: &[EntropyReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)
            .map_err(|e| Error::Format(format!("entropy CSV: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<entropy csv>", e))
}

/// `ε ∫∫ |∂x z|² φ`, from the per-cell dissipation the stepper collected.
///
/// `None` means `φ ≡ 1`, which reproduces the running accumulator.
pub fn defect_mass(traj: &Trajectory, phi: Option<&TestFunction>) -> f64 {
    let grid = *traj.grid();
    let dx = grid.dx();
    let mut total = 0.0;
    for w in traj.snapshots.windows(2) {
        let bins = &w[1].dissipation;
        let tm = 0.5 * (w[0].state.t + w[1].state.t);
        let sum: f64 = match phi {
            None => bins.iter().sum(),
            Some(phi) => bins
                .iter()
                .enumerate()
                .map(|(i, b)| b * phi.value(tm, grid.x(i) + 0.5 * dx))
                .sum(),
        };
        total += dx * sum;
    }
    total
}

/// Uniform grid of levels `c_j = c_min + j Δc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CGrid {
    pub c_min: f64,
    pub dc: f64,
    pub n: usize,
}

impl CGrid {
    pub fn new(c_min: f64, dc: f64, n: usize) -> Result<Self> {
        if !(dc > 0.0 && n >= 2 && c_min.is_finite()) {
            return Err(Error::Config("c-grid needs Δc > 0 and at least two levels".into()));
        }
        Ok(CGrid { c_min, dc, n })
    }

    /// `n` levels spanning `[lo - pad, hi + pad]`.
    pub fn spanning(lo: f64, hi: f64, pad: f64, n: usize) -> Result<Self> {
        let a = lo - pad;
        let b = hi + pad;
        Self::new(a, (b - a) / (n - 1).max(1) as f64, n)
    }

    /// Levels `(j - n/2 + 1/2) Δc`, symmetric about 0 and never equal to it.
    pub fn symmetric(half_width: f64, dc: f64) -> Result<Self> {
        let half = (half_width / dc).ceil().max(1.0) as usize;
        Self::new(-(half as f64 - 0.5) * dc, dc, 2 * half)
    }

    /// Symmetric grid covering `[-max|z| - Δc, max|z| + Δc]`.
    pub fn symmetric_covering(z: &Field, dc: f64) -> Result<Self> {
        Self::symmetric(z.max_abs() + 1.5 * dc, dc)
    }

    pub fn level(&self, j: usize) -> f64 {
        self.c_min + j as f64 * self.dc
    }

    pub fn c_max(&self) -> f64 {
        self.level(self.n - 1)
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.level(j)).collect()
    }
}

/// `f(x_i, c_j) = 1[z(x_i) > c_j]`, stored row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    grid: Grid,
    cgrid: CGrid,
    bits: Vec<u8>,
}

impl KineticField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cgrid(&self) -> &CGrid {
        &self.cgrid
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.cgrid.n + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.cgrid.n..(i + 1) * self.cgrid.n]
    }
}

/// Lifts `z` to its kinetic indicator on `cgrid`.
pub fn kinetic_field(z: &Field, cgrid: CGrid) -> Result<KineticField> {
    let (lo, hi) = (z.min(), z.max());
    let slack = 1e-12 * cgrid.dc;
    if cgrid.c_min > lo - cgrid.dc + slack || cgrid.c_max() < hi + cgrid.dc - slack {
        return Err(Error::Range(format!(
            "c-grid [{}, {}] does not cover [{lo} - Δc, {hi} + Δc]",
            cgrid.c_min,
            cgrid.c_max()
        )));
    }
    let levels = cgrid.levels();
    let mut bits = Vec::with_capacity(z.len() * cgrid.n);
    for &v in z.values() {
        bits.extend(levels.iter().map(|&c| u8::from(v > c)));
    }
    Ok(KineticField {
        grid: *z.grid(),
        cgrid,
        bits,
    })
}

/// `z̃ = Δc [Σ_{c_j > 0} f - Σ_{c_j ≤ 0} (1 - f)]`.
///
/// When the c-grid does not reach 0 the missing levels are the implied
/// `f = 1` below the grid (or `f = 0` above it), integrated exactly.
pub fn reconstruct_from_kinetic(f: &KineticField) -> Field {
    let cg = f.cgrid;
    let levels = cg.levels();
    let offset = if cg.c_min > 0.0 {
        cg.c_min - 0.5 * cg.dc
    } else if cg.c_max() < 0.0 {
        cg.c_max() + 0.5 * cg.dc
    } else {
        0.0
    };
    let values = (0..f.grid.n_points())
        .map(|i| {
            let row = f.row(i);
            let mut count = 0i64;
            for (b, &c) in row.iter().zip(&levels) {
                if c > 0.0 {
                    count += *b as i64;
                } else {
                    count -= 1 - *b as i64;
                }
            }
            offset + cg.dc * count as f64
        })
        .collect();
    Field::from_vec_unchecked(f.grid, values)
}

/// `|z|₊^p + |z|₋^p` from `∫₀^∞ f p c^{p-1} dc + ∫_{-∞}^0 (1-f) p|c|^{p-1} dc`.
///
/// Each level stands for the cell `[c_j - Δc/2, c_j + Δc/2]`, on which the
/// weight `p|c|^{p-1}` is integrated exactly; levels outside the grid carry the
/// implied values `f = 1` below and `f = 0` above.
pub fn lq_moment_from_kinetic(f: &KineticField, p: f64) -> Result<Field> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("moment order must be >= 1, got {p}")));
    }
    let cg = f.cgrid;
    let half = 0.5 * cg.dc;
    let pos = |a: f64, b: f64| b.max(0.0).powf(p) - a.max(0.0).powf(p);
    let neg = |a: f64, b: f64| (-a).max(0.0).powf(p) - (-b).max(0.0).powf(p);
    let cells: Vec<(f64, f64)> = cg
        .levels()
        .into_iter()
        .map(|c| (pos(c - half, c + half), neg(c - half, c + half)))
        .collect();
    let below = (cg.c_min - half).max(0.0).powf(p);
    let above = (-(cg.c_max() + half)).max(0.0).powf(p);
    let values = (0..f.grid.n_points())
        .map(|i| {
            let mut s = below + above;
            for (b, (wp, wn)) in f.row(i).iter().zip(&cells) {
                s += if *b == 1 { *wp } else { *wn };
            }
            s
        })
        .collect();
    Ok(Field::from_vec_unchecked(f.grid, values))
}

/// `F = f̄(1 - f̄)` of the mean of kinetic fields on shared grids.
#[derive(Debug, Clone, PartialEq)]
pub struct CesaroField {
    pub grid: Grid,
    pub cgrid: CGrid,
    pub values: Vec<f64>,
}

impl CesaroField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cgrid.n + j]
    }

    /// `∫∫ F dx dc`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.cgrid.dc
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn cesaro_f(fields: &[KineticField]) -> Result<CesaroField> {
    let first = fields
        .first()
        .ok_or_else(|| Error::Usage("cesaro_f needs at least one field".into()))?;
    if fields.iter().any(|f| f.grid != first.grid || f.cgrid != first.cgrid) {
        return Err(Error::Usage("kinetic fields must share x- and c-grids".into()));
    }
    let m = fields.len() as f64;
    let values = (0..first.bits.len())
        .map(|k| {
            let mean = fields.iter().map(|f| f.bits[k] as f64).sum::<f64>() / m;
            mean * (1.0 - mean)
        })
        .collect();
    Ok(CesaroField {
        grid: first.grid,
        cgrid: first.cgrid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_norm;
    use crate::noise::{sample_path, NoiseSpec};
    use crate::stepper::{run_at, uniform_times, SolverConfig};
    use proptest::prelude::*;

    fn smooth_run(t: f64, eps: f64) -> Trajectory {
        let g = Grid::new(8.0, 256).unwrap();
        let z0 = Field::from_fn(g, |x| 0.2 * (std::f64::consts::PI * x / 8.0).sin()).unwrap();
        let mut cfg = SolverConfig::new(t);
        cfg.epsilon = eps;
        let path = sample_path(&NoiseSpec::zero(), t, 1).unwrap();
        run_at(&z0, &path, &cfg, &uniform_times(t, 40)).unwrap()
    }

    #[test]
    fn bump_slope_constant() {
        let s = (0.2f64).sqrt();
        assert!((BUMP_SLOPE - 6.0 * s * 0.64).abs() < 1e-15);
        let phi = TestFunction::new(0, 0.0, 1.0, 1.0, TemporalProfile::Linear).unwrap();
        let fd = (1..1000)
            .map(|k| {
                let x = -1.0 + 2.0 * k as f64 / 1000.0;
                phi.eval(0.0, x).2.abs()
            })
            .fold(0.0, f64::max);
        assert!(fd <= BUMP_SLOPE && fd > 0.999 * BUMP_SLOPE);
    }

    #[test]
    fn catalog_fits_and_vanishes_at_horizon() {
        let g = Grid::new(20.0, 256).unwrap();
        let cat = catalog(20.0, 2.0);
        assert_eq!(cat.len(), 6);
        for phi in &cat {
            assert!(phi.fits(&g));
            for x in [-5.0, 0.0, 3.0] {
                assert!(phi.value(2.0, x).abs() < 1e-15);
                assert!(phi.value(0.7, x) >= 0.0);
            }
        }
    }

    #[test]
    fn time_derivative_matches_difference() {
        for prof in [TemporalProfile::CosSquared, TemporalProfile::Linear] {
            let phi = TestFunction::new(0, 0.1, 2.0, 3.0, prof).unwrap();
            let (t, x, h) = (1.1, 0.4, 1e-6);
            let fd = (phi.value(t + h, x) - phi.value(t - h, x)) / (2.0 * h);
            assert!((fd - phi.eval(t, x).1).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_test_function_gives_zero() {
        let traj = smooth_run(0.5, 0.0);
        assert_eq!(kruzkov_residual(&traj, 0.1, &TestFunction::zero(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn smooth_run_residuals_are_not_negative() {
        let traj = smooth_run(0.5, 0.0);
        let z = &traj.last().z;
        let cs = CGrid::spanning(z.min(), z.max(), 0.1, 41).unwrap().levels();
        for phi in catalog(8.0, 0.5) {
            for &c in &cs {
                let r = kruzkov_residual(&traj, c, &phi).unwrap();
                assert!(r >= -1e-3, "c = {c}, phi {}: {r}", phi.id);
            }
        }
    }

    #[test]
    fn levels_outside_the_range_give_the_balance_law() {
        // c below every value: |z - c| = z - c, and the residuals for c and for a
        // level above every value are the weak forms of the same balance law
        let traj = smooth_run(0.5, 0.0);
        let phi = catalog(8.0, 0.5)[1];
        let lo = kruzkov_residual(&traj, -1.0, &phi).unwrap();
        let hi = kruzkov_residual(&traj, 1.0, &phi).unwrap();
        // for c outside the range the c-dependent terms are not equal, but both
        // residuals are consistency errors of the same discretization
        assert!(lo.abs() < 1e-2 && hi.abs() < 1e-2, "{lo} {hi}");
    }

    #[test]
    fn empty_positive_part() {
        let traj = smooth_run(0.5, 1e-3);
        let phi = catalog(8.0, 0.5)[0];
        let rep = half_entropy_residual(&traj, 5.0, &phi, HalfSign::Plus, 0.01, DEFAULT_C_TOL).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert_eq!(rep.defect_mass, 0.0);
    }

    #[test]
    fn defect_mass_matches_accumulator() {
        let traj = smooth_run(0.5, 1e-2);
        let whole = defect_mass(&traj, None);
        assert!((whole - traj.accumulator()).abs() <= 1e-14 * whole.max(1e-300));
        let phi = catalog(8.0, 0.5)[0];
        let part = defect_mass(&traj, Some(&phi));
        assert!(part >= 0.0 && part <= whole);
        assert_eq!(defect_mass(&smooth_run(0.5, 0.0), None), 0.0);
    }

    #[test]
    fn kinetic_sign_row() {
        let g = Grid::new(1.0, 16).unwrap();
        let z = Field::from_fn(g, |x| x).unwrap();
        let cg = CGrid::symmetric(1.5, 0.25).unwrap();
        let cg = CGrid::new(cg.c_min - 0.25, 0.25, cg.n + 1).unwrap();
        // a grid that contains c = 0 exactly
        let j0 = cg.levels().iter().position(|c| c.abs() < 1e-12);
        let cg = match j0 {
            Some(_) => cg,
            None => CGrid::new(-1.5, 0.25, 13).unwrap(),
        };
        let f = kinetic_field(&z, cg).unwrap();
        let j0 = cg.levels().iter().position(|c| c.abs() < 1e-12).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert_eq!(f.get(i, j0), u8::from(x > 0.0));
        }
    }

    #[test]
    fn narrow_c_grid_is_a_range_error() {
        let g = Grid::new(1.0, 16).unwrap();
        let z = Field::from_fn(g, |x| x).unwrap();
        assert!(matches!(
            kinetic_field(&z, CGrid::new(-0.5, 0.1, 11).unwrap()),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn zero_reconstructs_to_zero() {
        let g = Grid::new(1.0, 16).unwrap();
        let z = Field::zeros(g);
        let f = kinetic_field(&z, CGrid::symmetric_covering(&z, 0.1).unwrap()).unwrap();
        assert_eq!(reconstruct_from_kinetic(&f).max_abs(), 0.0);
        assert!(lq_moment_from_kinetic(&f, 2.0).unwrap().max_abs() < 1e-30);
    }

    #[test]
    fn constant_reconstructs_within_dc() {
        let g = Grid::new(1.0, 16).unwrap();
        for a in [0.37, -1.3, 5.0] {
            let z = Field::constant(g, a);
            let dc = 0.05;
            // a grid hugging the value, away from 0
            let cg = CGrid::spanning(a, a, 2.0 * dc, 5).unwrap();
            let f = kinetic_field(&z, cg).unwrap();
            let err = reconstruct_from_kinetic(&f).sub(&z).unwrap().max_abs();
            assert!(err <= cg.dc, "a = {a}: {err}");
        }
    }

    #[test]
    fn cos_squared_moment() {
        let g = Grid::new(std::f64::consts::PI, 128).unwrap();
        let z = Field::from_fn(g, f64::cos).unwrap();
        let dc = 0.01;
        let f = kinetic_field(&z, CGrid::symmetric_covering(&z, dc).unwrap()).unwrap();
        let m = lq_moment_from_kinetic(&f, 2.0).unwrap();
        let want = z.map(|v| v * v).unwrap();
        assert!(m.sub(&want).unwrap().max_abs() <= 2.0 * dc);
        let m1 = lq_moment_from_kinetic(&f, 1.0).unwrap();
        let abs = reconstruct_from_kinetic(&f).map(f64::abs).unwrap();
        assert!(m1.sub(&abs).unwrap().max_abs() <= dc);
    }

    proptest! {
        #[test]
        fn round_trip_and_monotone_rows(vals in proptest::collection::vec(-3.0f64..3.0, 32), dc in 0.01f64..0.3) {
            let g = Grid::new(2.0, 32).unwrap();
            let z = Field::new(g, vals).unwrap();
            let cg = CGrid::symmetric_covering(&z, dc).unwrap();
            let f = kinetic_field(&z, cg).unwrap();
            for i in 0..32 {
                let row = f.row(i);
                prop_assert!(row.iter().all(|&b| b <= 1));
                prop_assert!(row.windows(2).all(|w| w[1] <= w[0]));
                prop_assert_eq!(row[0], 1);
                prop_assert_eq!(row[row.len() - 1], 0);
            }
            let err = reconstruct_from_kinetic(&f).sub(&z).unwrap().max_abs();
            prop_assert!(err <= dc);
            let zmax = z.max_abs();
            for p in [1.0, 2.0, 2.5] {
                let m = lq_moment_from_kinetic(&f, p).unwrap();
                let want = z.map(|v| v.abs().powf(p)).unwrap();
                let bound = p * zmax.powf(p - 1.0) * dc;
                prop_assert!(m.sub(&want).unwrap().max_abs() <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn cesaro_cases() {
        let g = Grid::new(1.0, 8).unwrap();
        let cg = CGrid::symmetric(2.0, 0.5).unwrap();
        let a = kinetic_field(&Field::constant(g, 0.1), cg).unwrap();
        let b = kinetic_field(&Field::constant(g, 1.1), cg).unwrap();
        let same = cesaro_f(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(same.max(), 0.0);
        let mixed = cesaro_f(&[a.clone(), b]).unwrap();
        // the levels 0.25, 0.75 separate the two values
        let levels = cg.levels();
        for (j, c) in levels.iter().enumerate() {
            let want = if *c > 0.1 && *c < 1.1 { 0.25 } else { 0.0 };
            assert_eq!(mixed.get(3, j), want);
        }
        let other = kinetic_field(&Field::constant(Grid::new(2.0, 8).unwrap(), 0.1), cg).unwrap();
        assert!(matches!(cesaro_f(&[a, other]), Err(Error::Usage(_))));
    }

    #[test]
    fn reports_csv_columns() {
        let rep = EntropyReport {
            c: 0.5,
            phi_id: 2,
            residual: 1e-3,
            defect_mass: 0.0,
            tol: 1e-2,
            pass: true,
        };
        let mut buf = Vec::new();
        write_reports_csv(&[rep], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("c,phi_id,residual,defect_mass,tol,pass"));
        let _ = lp_norm;
    }
}
