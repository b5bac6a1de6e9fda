use sdplab::entropy::*;
use sdplab::noise::{sample_path, NoiseSpec};
use sdplab::stepper::{run_at, uniform_times, SolverConfig, Trajectory};
use sdplab::{Field, Grid};

fn run(l: f64, n: usize, t: f64, snaps: usize, eps: f64, pressure: bool, f: impl Fn(f64) -> f64) -> Trajectory {
    let g = Grid::new(l, n).unwrap();
    let z0 = Field::from_fn(g, f).unwrap();
    let mut cfg = SolverConfig::new(t);
    cfg.pressure_enabled = pressure;
    cfg.epsilon = eps;
    let path = sample_path(&NoiseSpec::zero(), t, 1).unwrap();
    run_at(&z0, &path, &cfg, &uniform_times(t, snaps)).unwrap()
}

fn step(x: f64) -> f64 {
    if (-2.0..0.0).contains(&x) {
        1.0
    } else {
        0.0
    }
}

#[test]
fn below_the_range_residual_self_converges() {
    let sine = |x: f64| 0.2 * (std::f64::consts::PI * x / 8.0).sin();
    let phis = catalog(8.0, 0.5);
    let mut prev: Option<Vec<f64>> = None;
    for (n, snaps) in [(256, 11), (512, 21), (1024, 41)] {
        let traj = run(8.0, n, 0.5, snaps, 0.0, true, sine);
        let r: Vec<f64> = phis.iter().map(|p| kruzkov_residual(&traj, -1.0, p).unwrap().abs()).collect();
        if let Some(p) = &prev {
            for (a, b) in r.iter().zip(p) {
                assert!(a <= b || *a < 1e-12, "{a} after {b}");
            }
        }
        prev = Some(r);
    }
}

#[test]
fn smooth_pre_shock_residuals() {
    let traj = run(8.0, 1024, 0.5, 51, 0.0, true, |x| 0.2 * (std::f64::consts::PI * x / 8.0).sin());
    let cs = CGrid::spanning(-0.2, 0.2, 0.1, 41).unwrap().levels();
    for r in entropy_sweep(&traj, &cs, &catalog(8.0, 0.5), DEFAULT_C_TOL).unwrap() {
        assert!(r.residual >= -1e-3, "c {} phi {} residual {}", r.c, r.phi_id, r.residual);
    }
}

#[test]
fn half_entropy_balance_refines() {
    let phi = catalog(4.0, 1.0)[1];
    let gaps: Vec<f64> = [512, 1024, 2048]
        .iter()
        .map(|&n| {
            let traj = run(4.0, n, 1.0, 201, 1e-3, false, step);
            let r = half_entropy_residual(&traj, 0.3, &phi, HalfSign::Plus, 2.0 * traj.grid().dx(), DEFAULT_C_TOL).unwrap();
            (r.residual - r.defect_mass).abs()
        })
        .collect();
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
}

#[test]
fn frozen_tolerance_covers_burgers_calibration() {
    let traj = run(4.0, 256, 2.0, 21, 0.0, false, step);
    let cs = CGrid::spanning(0.0, 1.0, 0.1, 41).unwrap().levels();
    let reports = entropy_sweep(&traj, &cs, &catalog(4.0, 2.0), DEFAULT_C_TOL).unwrap();
    let need = required_c_tol(&reports, DEFAULT_C_TOL);
    assert!((need - 0.0136).abs() < 5e-4, "required {need}");
    assert!(reports.iter().all(|r| r.pass));
}

#[test]
fn burgers_shock_defect_masses_stay_in_band() {
    let masses: Vec<f64> = [1e-2, 3e-3, 1e-3, 3e-4]
        .iter()
        .map(|&eps| run(4.0, 8192, 1.0, 11, eps, false, step).accumulator())
        .collect();
    let hi = masses.iter().cloned().fold(0.0, f64::max);
    let lo = masses.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 4.0, "{masses:?}");
    // Rankine-Hugoniot: a unit shock dissipates 1/12 per unit time. Only the
    // rungs with ε ≥ Δx resolve the viscous profile on this grid.
    for m in &masses[1..3] {
        assert!((m - 1.0 / 12.0).abs() < 0.15 / 12.0, "{masses:?}");
    }
}

#[test]
fn kinetic_round_trip_on_a_run() {
    let traj = run(4.0, 512, 1.0, 5, 1e-3, true, step);
    let z = &traj.last().z;
    let cg = CGrid::symmetric_covering(z, 0.01).unwrap();
    let back = reconstruct_from_kinetic(&kinetic_field(z, cg).unwrap());
    assert!(back.sub(z).unwrap().max_abs() <= 0.01 + 1e-12);
}
