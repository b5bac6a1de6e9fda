use sdplab::scenario::*;

fn noisy(members_t: f64, extra: &[&str]) -> ScenarioConfig {
    let text = format!(
        r#"
name = "noisy"
[grid]
half_length = 8.0
n_points = 64
[solver]
t_final = {members_t}
[noise]
seed = 99
steps = 4
[[noise.modes]]
kind = "gaussian"
amplitude = 0.5
center = 0.0
width = 1.0
[initial]
kind = "sine"
amplitude = 0.0
wavenumber = 1.0
[diagnostics]
snapshots = 2
ledger = false
entropy = false
"#
    );
    let ov: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    ScenarioConfig::from_toml_str(&text, &ov).unwrap()
}

#[test]
fn early_ensemble_variance_is_linear_in_time() {
    let t = 0.05;
    let n = 4000;
    let cfg = noisy(t, &[]);
    let r = ensemble(&cfg, n).unwrap();
    assert!(r.passed());
    let st = r.ensemble.unwrap();
    let grid = *st.mean.grid();
    let i = grid.nearest_index(0.0);
    let expected = 0.25 * t;
    let se = expected * (2.0 / (n - 1) as f64).sqrt();
    let got = st.variance.values()[i];
    assert!((got - expected).abs() < 3.0 * se, "variance {got}, expected {expected} ± {se}");
    // far from the mode the noise, and so the variance, vanish
    assert!(st.variance.values()[0] < 1e-12);
}

#[test]
fn epsilon_ladder_shares_one_path() {
    let cfg = noisy(0.2, &["initial.amplitude=0.5", "grid.n_points=128"]);
    let ladder = [1e-2, 1e-3];
    let r = epsilon_study(&cfg, &ladder).unwrap();
    assert_eq!(r.runs.len(), 2);
    for (run, &eps) in r.runs.iter().zip(&ladder) {
        assert_eq!(run.seed, cfg.seed());
        let single = run_scenario(&noisy(
            0.2,
            &["initial.amplitude=0.5", "grid.n_points=128", &format!("solver.epsilon={eps:e}")],
        ))
        .unwrap();
        assert_eq!(run.summary.as_ref().unwrap().accumulator, single.summary.accumulator);
    }
    assert_eq!(r.distances.len(), 1);
    assert!(r.distances[0].l1 > 0.0);
}

#[test]
fn mesh_refinement_contracts() {
    let cfg = noisy(0.5, &["initial.amplitude=0.5", "solver.epsilon=1e-2"]);
    let r = mesh_study(&cfg, &[128, 256, 512, 1024]).unwrap();
    assert!(r.passed(), "{}", r.text());
    let d: Vec<f64> = r.distances.iter().map(|d| d.l1).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn ensemble_members_are_reproducible() {
    let cfg = noisy(0.1, &[]);
    let a = ensemble(&cfg, 3).unwrap();
    let b = ensemble(&cfg, 3).unwrap();
    assert_eq!(a.ensemble.unwrap().variance, b.ensemble.unwrap().variance);
    assert_eq!(a.runs[0].seed, cfg.seed());
    assert_ne!(a.runs[1].seed, a.runs[2].seed);
}
