//! Runtime checks of the a-priori estimates: the functional `S`, the pressure
//! bounds, the Gronwall envelope and the `L^q` comparison argument.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{diff2, lp_norm, DerivBackend, Field};
use crate::helmholtz::{solve_y, KernelSpec};
use crate::noise::NoisePath;
use crate::spectral;
use crate::stepper::{SolverState, Trajectory};

/// Calibration constant in the growth rates, fixed on the peakon-with-noise scenario.
pub const DEFAULT_CONSTANT: f64 = 4.0;

/// Relative slack for bounds that hold exactly up to rounding and quadrature.
const BOUND_SLACK: f64 = 1e-6;

/// `[‖y‖², ‖∂x y‖², ‖∂xx y‖²]` by Parseval.
///
/// The Nyquist mode counts with `k = π/Δx` in both derivative norms, so the
/// three terms are the exact spectral seminorms of the trigonometric interpolant.
pub fn sobolev_energies(y: &Field) -> [f64; 3] {
    let g = y.grid();
    let coeffs = spectral::forward(y.values());
    let scale = g.dx() / g.n_points() as f64;
    let mut out = [0.0; 3];
    for (j, c) in coeffs.iter().enumerate() {
        let k2 = spectral::wavenumber(g, j).powi(2);
        let e = c.norm_sqr();
        out[0] += e;
        out[1] += k2 * e;
        out[2] += k2 * k2 * e;
    }
    out.map(|v| v * scale)
}

/// `S(y) = 4‖y‖² + 5‖∂x y‖² + ‖∂xx y‖²` with spectral derivatives.
pub fn s_functional(y: &Field) -> f64 {
    let [e0, e1, e2] = sobolev_energies(y);
    4.0 * e0 + 5.0 * e1 + e2
}

/// `(‖(4 - ∂xx) y‖², 16‖y‖² + 8‖∂x y‖² + ‖∂xx y‖²)`; the two agree.
pub fn norm_identity(y: &Field) -> (f64, f64) {
    let d2 = diff2(y, DerivBackend::Spectral);
    let z = y.lin_comb(4.0, &d2, -1.0).expect("same grid");
    let lhs = lp_norm(&z, 2.0).expect("p = 2").powi(2);
    let [e0, e1, e2] = sobolev_energies(y);
    (lhs, 16.0 * e0 + 8.0 * e1 + e2)
}

/// One row of the estimate ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub z_l2: f64,
    pub z_lq: f64,
    pub s_y: f64,
    pub p_l1: f64,
    pub p_linf: f64,
    pub p_min: f64,
    pub dp_l1: f64,
    pub dp_linf: f64,
    pub pxx_lq2: f64,
    pub accumulator: f64,
    pub w_l2: f64,
    pub w_lq: f64,
    pub wx_linf: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p_linf_bound: f64,
    pub dp_linf_bound: f64,
    pub pxx_bound: f64,
}

/// Computes every ledger quantity for one state and asserts the row invariants.
pub fn record(state: &SolverState, accumulator: f64, q: f64, constant: f64) -> Result<LedgerRow> {
    let grid = *state.grid();
    let u = state.u();
    let p = &state.pressure.p;
    let dp = &state.pressure.dp;
    let norm = |f: &Field, r: f64| lp_norm(f, r);
    let u_l2 = norm(&u, 2.0)?;
    let u_sq = u_l2 * u_l2;
    let z_lq = norm(&state.z, q)?;
    let w_lq = norm(&state.w, q)?;
    let p_l1 = norm(p, 1.0)?;
    let p_linf = p.max_abs();
    // ∂xx p from the equation itself
    let pxx = p.zip_map(&u, |pv, uv| pv - 1.5 * uv * uv)?;
    let wx_linf = state.dw.max_abs();
    let w_l2 = norm(&state.w, 2.0)?;

    // the larger of the continuum and the discrete-operator constants
    let kernel = KernelSpec::pressure();
    let discrete = kernel.discrete_constants(&grid);
    let g_max = kernel.periodized_max(grid.half_length()).max(discrete.max_weight);
    let mass = discrete.max_mass.max(1.0);
    let row = LedgerRow {
        t: state.t,
        z_l2: norm(&state.z, 2.0)?,
        z_lq,
        s_y: s_functional(&solve_y(&state.z)),
        p_l1,
        p_linf,
        p_min: p.min(),
        dp_l1: norm(dp, 1.0)?,
        dp_linf: dp.max_abs(),
        pxx_lq2: norm(&pxx, q / 2.0)?,
        accumulator,
        w_l2,
        w_lq,
        wx_linf,
        alpha: constant * (wx_linf + 1.0),
        beta: constant * w_l2 * w_l2 * wx_linf * wx_linf,
        p_linf_bound: 1.5 * g_max * u_sq,
        dp_linf_bound: 1.5 * u_sq,
        pxx_bound: p_l1.powf(2.0 / q) * p_linf.powf(1.0 - 2.0 / q) + 1.5 * (z_lq + w_lq).powi(2),
    };
    check_row(&row, 1.5 * mass * u_sq)?;
    Ok(row)
}

fn check_row(row: &LedgerRow, l1_bound: f64) -> Result<()> {
    let exceeds = |v: f64, bound: f64| v > bound * (1.0 + BOUND_SLACK) + 1e-300;
    if row.p_min < -1e-8 * row.p_linf.max(1.0) {
        return Err(Error::EstimateViolation(format!(
            "pressure positivity: min p = {:e} at t = {}",
            row.p_min, row.t
        )));
    }
    let checks = [
        ("‖p‖∞ kernel bound", row.p_linf, row.p_linf_bound),
        ("‖∂x p‖∞ kernel bound", row.dp_linf, row.dp_linf_bound),
        ("‖p‖₁ bound", row.p_l1, l1_bound),
        ("‖∂xx p‖_(q/2) bound", row.pxx_lq2, row.pxx_bound),
    ];
    for (name, v, bound) in checks {
        if exceeds(v, bound) {
            return Err(Error::EstimateViolation(format!(
                "{name}: {v:e} > {bound:e} at t = {}",
                row.t
            )));
        }
    }
    Ok(())
}

/// Time series of [`LedgerRow`]s for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateLedger {
    pub q: f64,
    pub constant: f64,
    pub rows: Vec<LedgerRow>,
}

impl EstimateLedger {
    pub fn from_trajectory(traj: &Trajectory, q: f64, constant: f64) -> Result<Self> {
        let mut rows = Vec::with_capacity(traj.snapshots.len());
        for snap in &traj.snapshots {
            let row = record(&snap.state, snap.accumulator, q, constant)?;
            if let Some(prev) = rows.last() {
                let prev: &LedgerRow = prev;
                if row.accumulator < prev.accumulator {
                    return Err(Error::EstimateViolation(format!(
                        "accumulator decreased at t = {}",
                        row.t
                    )));
                }
            }
            rows.push(row);
        }
        Ok(EstimateLedger { q, constant, rows })
    }

    /// Largest relative increase of `S(y)` between consecutive rows.
    pub fn max_s_increase(&self) -> f64 {
        let s0 = self.rows.first().map_or(0.0, |r| r.s_y);
        if s0 == 0.0 {
            return 0.0;
        }
        self.rows
            .windows(2)
            .map(|w| (w[1].s_y - w[0].s_y) / s0)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    /// Relative drift `max_t |S(y(t)) - S(y₀)| / S(y₀)`.
    pub fn s_drift(&self) -> f64 {
        let s0 = self.rows.first().map_or(0.0, |r| r.s_y);
        if s0 == 0.0 {
            return 0.0;
        }
        self.rows
            .iter()
            .map(|r| (r.s_y - s0).abs() / s0)
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::Format(format!("ledger CSV: {e}")))?;
        }
        w.flush().map_err(|e| Error::io("<ledger csv>", e))
    }
}

/// Gronwall envelope `S(y(t)) ≤ (S(y₀) + A(t)) B(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallBound {
    pub constant: f64,
    /// `A(T) = ∫₀ᵀ β`
    pub a: f64,
    /// `B(T) = exp ∫₀ᵀ α`
    pub b: f64,
    pub s0: f64,
    /// Largest `S(y(t)) / bound(t)` over the ledger.
    pub max_ratio: f64,
    /// Largest `accumulator / (2 (S₀ + A) B)`.
    pub accumulator_ratio: f64,
    /// Largest `‖z‖² / (4 (S₀ + A) B)`.
    pub l2_ratio: f64,
    pub verdict: bool,
}

impl GronwallBound {
    pub fn margin(&self) -> f64 {
        if self.max_ratio > 0.0 {
            1.0 / self.max_ratio
        } else {
            f64::INFINITY
        }
    }
}

/// Cumulative `∫α` and `∫β` on the path knots, by the trapezoid rule.
struct Envelope {
    times: Vec<f64>,
    int_alpha: Vec<f64>,
    int_beta: Vec<f64>,
}

impl Envelope {
    /// Integrals for `C = 1`; both scale linearly in `C`.
    fn new(path: &NoisePath, grid: crate::grid::Grid, t_final: f64) -> Result<Self> {
        let sampler = path.sampler(grid);
        let mut times = Vec::new();
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for m in 0..=path.n_steps() {
            let t = path.knot_time(m);
            if t > t_final * (1.0 + 1e-12) {
                break;
            }
            let (w, dw) = sampler.eval(path, t)?;
            let wx = dw.max_abs();
            let w2 = lp_norm(&w, 2.0)?;
            times.push(t);
            alpha.push(wx + 1.0);
            beta.push(w2 * w2 * wx * wx);
        }
        if *times.last().unwrap() < t_final {
            let (w, dw) = sampler.eval(path, t_final)?;
            let wx = dw.max_abs();
            let w2 = lp_norm(&w, 2.0)?;
            times.push(t_final);
            alpha.push(wx + 1.0);
            beta.push(w2 * w2 * wx * wx);
        }
        let cumulative = |v: &[f64]| {
            let mut out = vec![0.0; v.len()];
            for i in 1..v.len() {
                out[i] = out[i - 1] + 0.5 * (times[i] - times[i - 1]) * (v[i] + v[i - 1]);
            }
            out
        };
        Ok(Envelope {
            int_alpha: cumulative(&alpha),
            int_beta: cumulative(&beta),
            times,
        })
    }

    /// `(A(t), ln B(t))` for `C = 1`, linear between knots.
    fn at(&self, t: f64) -> (f64, f64) {
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let th = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 1.0 };
        let lerp = |v: &[f64]| v[k - 1] + th * (v[k] - v[k - 1]);
        (lerp(&self.int_beta), lerp(&self.int_alpha))
    }
}

/// Evaluates the Gronwall envelope along a ledger.
pub fn gronwall_bound(traj: &Trajectory, ledger: &EstimateLedger) -> Result<GronwallBound> {
    let env = Envelope::new(&traj.path, *traj.grid(), ledger_horizon(ledger))?;
    Ok(gronwall_with(&env, ledger, ledger.constant))
}

fn ledger_horizon(ledger: &EstimateLedger) -> f64 {
    ledger.rows.last().map_or(0.0, |r| r.t).max(1e-300)
}

fn gronwall_with(env: &Envelope, ledger: &EstimateLedger, constant: f64) -> GronwallBound {
    let t_final = ledger_horizon(ledger);
    let s0 = ledger.rows.first().map_or(0.0, |r| r.s_y);
    let mut max_ratio: f64 = 0.0;
    let mut acc_ratio: f64 = 0.0;
    let mut l2_ratio: f64 = 0.0;
    let ratio = |v: f64, b: f64| {
        if v <= 0.0 {
            0.0
        } else if b > 0.0 {
            v / b
        } else {
            f64::INFINITY
        }
    };
    for row in &ledger.rows {
        let (a, ln_b) = env.at(row.t);
        let bound = (s0 + constant * a) * (constant * ln_b).exp();
        max_ratio = max_ratio.max(ratio(row.s_y, bound));
        acc_ratio = acc_ratio.max(ratio(row.accumulator, 2.0 * bound));
        l2_ratio = l2_ratio.max(ratio(row.z_l2 * row.z_l2, 4.0 * bound));
    }
    let (a, ln_b) = env.at(t_final);
    GronwallBound {
        constant,
        a: constant * a,
        b: (constant * ln_b).exp(),
        s0,
        max_ratio,
        accumulator_ratio: acc_ratio,
        l2_ratio,
        verdict: max_ratio <= 1.0 && acc_ratio <= 1.0 && l2_ratio <= 1.0,
    }
}

/// Smallest constant `C` for which the Gronwall and `L^q` verdicts hold on this
/// trajectory, to a relative precision of 1e-6. Returns `f64::INFINITY` if even
/// `C = 1e6` fails.
pub fn required_constant(traj: &Trajectory, ledger: &EstimateLedger) -> Result<f64> {
    let env = Envelope::new(&traj.path, *traj.grid(), ledger_horizon(ledger))?;
    let passes = |c: f64| gronwall_with(&env, ledger, c).verdict && lq_with(ledger, c).verdict;
    if passes(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1e-6;
    while !passes(hi) {
        hi *= 4.0;
        if hi > 1e6 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = hi / 4.0;
    if lo < 1e-6 {
        lo = 0.0;
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Outcome of the `L^q` comparison check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LqVerdict {
    pub q: f64,
    pub sup_lq: f64,
    /// Largest ratio of the discrete rate of `‖z‖_q^q` to the admissible rate.
    pub rate_ratio: f64,
    /// Largest ratio of `‖z‖_q^q` to the solution of the comparison equation.
    pub bihari_ratio: f64,
    pub verdict: bool,
}

/// Checks `d/dt Y ≤ C(Y^{(q-1)/q} + α_q Y + β_q)` with `Y = ‖z‖_q^q`,
/// `α_q = ‖∂xW‖∞`, `β_q = ‖∂xW‖∞ ‖W‖_q^q`, both on ledger differences and
/// against the comparison equation integrated from `Y(0)`.
pub fn lq_monitor(ledger: &EstimateLedger) -> LqVerdict {
    lq_with(ledger, ledger.constant)
}

fn lq_with(ledger: &EstimateLedger, c: f64) -> LqVerdict {
    let q = ledger.q;
    let rows = &ledger.rows;
    let rate = |y: f64, r: &LedgerRow| {
        c * (y.max(0.0).powf((q - 1.0) / q) + r.wx_linf * y + r.wx_linf * r.w_lq.powf(q))
    };
    let mut rate_ratio: f64 = 0.0;
    let mut bihari_ratio: f64 = 0.0;
    let mut sup_lq: f64 = rows.first().map_or(0.0, |r| r.z_lq);
    let mut cmp = rows.first().map_or(0.0, |r| r.z_lq.powf(q));
    for w in rows.windows(2) {
        let (r0, r1) = (&w[0], &w[1]);
        let dt = r1.t - r0.t;
        if dt <= 0.0 {
            continue;
        }
        let y0 = r0.z_lq.powf(q);
        let y1 = r1.z_lq.powf(q);
        let slope = (y1 - y0) / dt;
        let allowed = rate(y0, r0).max(rate(y1, r1));
        if slope > 0.0 {
            rate_ratio = rate_ratio.max(if allowed > 0.0 { slope / allowed } else { f64::INFINITY });
        }
        // Heun step of the comparison equation, coefficients from both ends
        let k1 = rate(cmp, r0);
        let k2 = rate(cmp + dt * k1, r1);
        cmp += 0.5 * dt * (k1 + k2);
        if y1 > 0.0 {
            bihari_ratio = bihari_ratio.max(if cmp > 0.0 { y1 / cmp } else { f64::INFINITY });
        }
        sup_lq = sup_lq.max(r1.z_lq);
    }
    LqVerdict {
        q,
        sup_lq,
        rate_ratio,
        bihari_ratio,
        verdict: sup_lq.is_finite() && rate_ratio <= 1.0 && bihari_ratio <= 1.0,
    }
}

/// Plain-text summary of the bounds for one scenario.
pub fn bounds_report(scenario: &str, g: &GronwallBound, lq: &LqVerdict) -> String {
    let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
    format!(
        "scenario: {scenario}\n\
         gronwall   C = {:.3}  A = {:.4e}  B = {:.4e}  S0 = {:.4e}\n\
         S(y) <= (S0 + A) B         ratio {:.4e}  margin {:.3}  {}\n\
         accumulator <= 2(S0 + A) B ratio {:.4e}  {}\n\
         |z|^2 <= 4(S0 + A) B       ratio {:.4e}  {}\n\
         L^q (q = {:.2})  sup |z|_q = {:.4e}  rate ratio {:.4e}  comparison ratio {:.4e}  {}\n",
        g.constant,
        g.a,
        g.b,
        g.s0,
        g.max_ratio,
        g.margin(),
        mark(g.max_ratio <= 1.0),
        g.accumulator_ratio,
        mark(g.accumulator_ratio <= 1.0),
        g.l2_ratio,
        mark(g.l2_ratio <= 1.0),
        lq.q,
        lq.sup_lq,
        lq.rate_ratio,
        lq.bihari_ratio,
        mark(lq.verdict),
    )
}
