//! Uniform periodic grid on `[-L, L)` and real grid functions.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Uniform periodic grid with `N` nodes on `[-L, L)`.
///
/// Node `i` sits at `x_i = -L + i Δx` with `Δx = 2L / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_length: f64,
    n_points: usize,
}

impl Grid {
    /// Builds a grid. `N` must be a power of two no smaller than 8 and `L` positive.
    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Config(format!(
                "half length must be positive and finite, got {half_length}"
            )));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 8, got {n_points}"
            )));
        }
        Ok(Grid {
            half_length,
            n_points,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Index of the node nearest to `x` after periodic wrapping.
    pub fn nearest_index(&self, x: f64) -> usize {
        let s = (x + self.half_length).rem_euclid(self.length()) / self.dx();
        (s.round() as usize) % self.n_points
    }

    /// Boolean mask of nodes with `|x| < fraction · L`.
    pub fn central_window(&self, fraction: f64) -> Vec<bool> {
        let half = fraction * self.half_length;
        self.nodes().map(|x| x.abs() < half).collect()
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(L={}, N={}) vs (L={}, N={})",
                self.half_length, self.n_points, other.half_length, other.n_points
            )))
        }
    }
}

/// Derivative discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivBackend {
    #[default]
    Spectral,
    Central2,
}

/// Point values of a real function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    /// Wraps point values; rejects wrong lengths and non-finite entries.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n_points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Field { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.n_points()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Field::new(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Field::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, a: f64) -> Field {
        Field::from_vec_unchecked(self.grid, self.values.iter().map(|v| a * v).collect())
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ f dx` by the uniform-weight rule.
    pub fn integral(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.dx()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    /// Largest of `|f(x_0)|` and `|f(x_{N-1})|`, the values next to the periodic seam.
    pub fn boundary_magnitude(&self) -> f64 {
        self.values[0].abs().max(self.values[self.len() - 1].abs())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `(∫ |f|^p dx)^{1/p}` with uniform weights, or `max |f_i|` for `p = ∞`.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("Lp norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let dx = f.grid().dx();
    let sum: f64 = if p == 1.0 {
        f.values().iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((dx * sum).powf(1.0 / p))
}

/// `‖f‖_p^p`, skipping the root (used for `L^q` moments).
pub fn lp_power(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 || p.is_infinite() {
        return Err(Error::Domain(format!("Lp power needs finite p >= 1, got {p}")));
    }
    Ok(f.grid().dx() * f.values().iter().map(|v| v.abs().powf(p)).sum::<f64>())
}

/// First derivative.
///
/// The spectral backend zeroes the Nyquist mode, so it is exact for every
/// resolved trigonometric mode.
pub fn diff(f: &Field, backend: DerivBackend) -> Field {
    let grid = *f.grid();
    let n = grid.n_points();
    let out = match backend {
        DerivBackend::Spectral => spectral::apply_multiplier(&grid, f.values(), |k, j| {
            if j == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            }
        }),
        DerivBackend::Central2 => {
            let v = f.values();
            let inv = 0.5 / grid.dx();
            (0..n)
                .map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) * inv)
                .collect()
        }
    };
    Field::from_vec_unchecked(grid, out)
}

/// Second derivative (spectral keeps the Nyquist mode; central is the 3-point Laplacian).
pub fn diff2(f: &Field, backend: DerivBackend) -> Field {
    let grid = *f.grid();
    let out = match backend {
        DerivBackend::Spectral => {
            spectral::apply_multiplier(&grid, f.values(), |k, _| Complex64::new(-k * k, 0.0))
        }
        DerivBackend::Central2 => laplacian3(f.values(), grid.dx()),
    };
    Field::from_vec_unchecked(grid, out)
}

/// Periodic 3-point Laplacian.
pub(crate) fn laplacian3(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    let inv = 1.0 / (dx * dx);
    (0..n)
        .map(|i| (v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) * inv)
        .collect()
}

/// `(Δx / N) Σ |f̂_k|²`, the transform-side energy.
pub fn spectral_energy(f: &Field) -> f64 {
    let coeffs = spectral::forward(f.values());
    let n = f.len() as f64;
    f.grid().dx() / n * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacing() {
        let g = Grid::new(PI, 8).unwrap();
        assert_relative_eq!(g.dx(), PI / 4.0);
        let g = Grid::new(20.0, 4096).unwrap();
        assert_eq!(g.dx(), 40.0 / 4096.0);
        assert!((g.dx() * 4096.0 - 40.0).abs() <= f64::EPSILON * 40.0);
        assert_eq!(g.x(0), -20.0);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(matches!(Grid::new(1.0, 7), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1.0, 4), Err(Error::Config(_))));
        assert!(matches!(Grid::new(0.0, 8), Err(Error::Config(_))));
        assert!(matches!(Grid::new(-1.0, 16), Err(Error::Config(_))));
    }

    #[test]
    fn field_rejects_nan() {
        let g = Grid::new(1.0, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(Field::new(g, v).is_err());
        assert!(Field::new(g, vec![0.0; 9]).is_err());
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = Grid::new(PI, 64).unwrap();
        assert_eq!(lp_norm(&Field::zeros(g), 2.0).unwrap(), 0.0);
        let one = Field::constant(g, 1.0);
        assert_relative_eq!(lp_norm(&one, 2.0).unwrap(), (2.0 * PI).sqrt(), epsilon = 1e-14);
        assert_eq!(lp_norm(&one, f64::INFINITY).unwrap(), 1.0);
        assert!(matches!(lp_norm(&one, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn peakon_l2_norm_is_one() {
        // ∫ e^{-2|x|} dx = 1 on the whole line; the kink at 0 costs Δx²/6
        let g = Grid::new(20.0, 32768).unwrap();
        let f = Field::from_fn(g, |x| (-x.abs()).exp()).unwrap();
        let norm = lp_norm(&f, 2.0).unwrap();
        assert!((norm - 1.0).abs() < 1e-6, "norm = {norm}");
    }

    #[test]
    fn spectral_derivative_of_resolved_modes() {
        let g = Grid::new(PI, 64).unwrap();
        let c = Field::constant(g, 3.5);
        assert!(diff(&c, DerivBackend::Spectral).max_abs() < 1e-13);
        assert!(diff(&c, DerivBackend::Central2).max_abs() < 1e-13);

        let s = Field::from_fn(g, f64::sin).unwrap();
        let d = diff(&s, DerivBackend::Spectral);
        let err = d.zip_map(&Field::from_fn(g, f64::cos).unwrap(), |a, b| a - b).unwrap();
        assert!(err.max_abs() < 1e-13);

        let k = (g.n_points() / 4) as f64;
        let s = Field::from_fn(g, |x| (k * x).sin()).unwrap();
        let d = diff(&s, DerivBackend::Spectral);
        let exact = Field::from_fn(g, |x| k * (k * x).cos()).unwrap();
        let rel = lp_norm(&d.sub(&exact).unwrap(), f64::INFINITY).unwrap() / k;
        assert!(rel < 1e-10, "rel = {rel}");
    }

    #[test]
    fn central_derivative_is_second_order() {
        let errs: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&n| {
                let g = Grid::new(PI, n).unwrap();
                let d = diff(&Field::from_fn(g, f64::sin).unwrap(), DerivBackend::Central2);
                d.sub(&Field::from_fn(g, f64::cos).unwrap()).unwrap().max_abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.05, "order = {order}");
    }

    #[test]
    fn parseval_matches_quadrature() {
        let g = Grid::new(3.0, 128).unwrap();
        let f = Field::from_fn(g, |x| (-(x * x)).exp() + 0.3 * (x * 2.0).sin()).unwrap();
        let direct = lp_norm(&f, 2.0).unwrap().powi(2);
        assert_relative_eq!(direct, spectral_energy(&f), max_relative = 1e-10);
    }

    fn arb_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn lp_norm_is_homogeneous(v in arb_values(32), a in -5.0f64..5.0, p in 1.0f64..6.0) {
            let g = Grid::new(2.0, 32).unwrap();
            let f = Field::new(g, v).unwrap();
            for q in [p, f64::INFINITY] {
                let lhs = lp_norm(&f.scale(a), q).unwrap();
                let rhs = a.abs() * lp_norm(&f, q).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
            }
        }

        #[test]
        fn diff_is_linear(u in arb_values(64), w in arb_values(64), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = Grid::new(5.0, 64).unwrap();
            let f = Field::new(g, u).unwrap();
            let h = Field::new(g, w).unwrap();
            for backend in [DerivBackend::Spectral, DerivBackend::Central2] {
                let lhs = diff(&f.lin_comb(a, &h, b).unwrap(), backend);
                let rhs = diff(&f, backend).lin_comb(a, &diff(&h, backend), b).unwrap();
                let scale = lp_norm(&lhs, f64::INFINITY).unwrap().max(1.0);
                prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * scale);
            }
        }
    }
}
