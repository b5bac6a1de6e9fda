//! Discrete Fourier helpers on the periodic grid.
//!
//! Plans are cached per thread, so concurrent callers never share a planner.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

struct PlanCache {
    planner: FftPlanner<f64>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache {
        planner: FftPlanner::new(),
        forward: HashMap::new(),
        inverse: HashMap::new(),
    });
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut cache = cell.borrow_mut();
        let PlanCache {
            planner,
            forward,
            inverse: inv,
        } = &mut *cache;
        let map = if inverse { inv } else { forward };
        map.entry(n)
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Unnormalized forward DFT of real samples.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Inverse DFT including the 1/N factor; returns the real part.
pub fn inverse_real(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let n = coeffs.len();
    plan(n, true).process(&mut coeffs);
    let scale = 1.0 / n as f64;
    coeffs.into_iter().map(|c| c.re * scale).collect()
}

/// Angular wavenumber of DFT bin `j` on a grid of period 2L.
///
/// The Nyquist bin is reported as positive.
pub fn wavenumber(grid: &Grid, j: usize) -> f64 {
    let n = grid.n_points();
    let base = std::f64::consts::PI / grid.half_length();
    let signed = if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    };
    signed * base
}

/// Applies a Fourier multiplier `symbol(k, j)` to real samples.
pub fn apply_multiplier(
    grid: &Grid,
    values: &[f64],
    symbol: impl Fn(f64, usize) -> Complex64,
) -> Vec<f64> {
    let mut coeffs = forward(values);
    for (j, c) in coeffs.iter_mut().enumerate() {
        *c *= symbol(wavenumber(grid, j), j);
    }
    inverse_real(coeffs)
}
