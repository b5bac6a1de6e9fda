//! Inversion of `κ² - ∂xx` on the periodic grid.
//!
//! Two independent backends are provided:
//!
//! * [`HelmholtzBackend::Spectral`] divides Fourier mode `k` by `κ² + k²`.
//! * [`HelmholtzBackend::Kernel`] convolves with the periodized Green function
//!   `G(x) = cosh(κ(|x| - L)) / (2κ sinh(κL))`. The convolution is split into
//!   the two one-sided exponential integrals
//!
//!   ```text
//!   Λ(x) = ∫_{-∞}^{x} f(y) e^{-κ(x-y)} dy,   Ρ(x) = ∫_{x}^{∞} f(y) e^{-κ(y-x)} dy
//!   ```
//!
//!   of the periodic extension of `f`, so that `g = (Λ + Ρ) / 2κ` and
//!   `∂x g = (Ρ - Λ) / 2`. Each one-sided integral is evaluated by product
//!   integration: `f` is replaced by its quartic interpolant on groups of four
//!   cells and the exponential is integrated exactly, so the kink of the
//!   kernel at the target point costs nothing and the error is O(Δx⁶) for
//!   smooth sources. Both sweeps are O(N) recursions. For `κΔx <= 0.5` the
//!   combined node weights are positive; on coarser grids the interpolant
//!   drops to piecewise linear, whose weights are positive by construction.
//!   Either way a nonnegative source gives a nonnegative `g`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelmholtzBackend {
    Spectral,
    #[default]
    Kernel,
}

/// Operator `κ² - ∂xx` with free-space kernel `e^{-κ|x|} / 2κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kappa: f64,
}

impl KernelSpec {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        Ok(KernelSpec { kappa })
    }

    /// `(1 - ∂xx)`, the pressure operator.
    pub fn pressure() -> Self {
        KernelSpec { kappa: 1.0 }
    }

    /// `(4 - ∂xx)`, the operator defining the auxiliary field `y`.
    pub fn auxiliary() -> Self {
        KernelSpec { kappa: 2.0 }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Prefactor of the free-space kernel.
    pub fn normalization(&self) -> f64 {
        0.5 / self.kappa
    }

    /// Closed-form periodic Green function on a period of length `2L`.
    pub fn periodized(&self, d: f64, half_length: f64) -> f64 {
        let period = 2.0 * half_length;
        let r = d.rem_euclid(period);
        let r = r.min(period - r);
        let k = self.kappa;
        // cosh(κ(r - L)) / sinh(κL) written with decaying exponentials
        let e = (-2.0 * k * half_length).exp();
        ((-k * r).exp() + (-k * (period - r)).exp()) / (2.0 * k * (1.0 - e))
    }

    /// Derivative of [`KernelSpec::periodized`]; zero at `d = 0`.
    pub fn periodized_derivative(&self, d: f64, half_length: f64) -> f64 {
        let period = 2.0 * half_length;
        let r = d.rem_euclid(period);
        if r == 0.0 || r == half_length {
            return 0.0;
        }
        let k = self.kappa;
        let e = (-2.0 * k * half_length).exp();
        // for r in (0, 2L) the kernel is (e^{-κr} + e^{-κ(2L-r)}) / (2κ(1-e))
        (-(-k * r).exp() + (-k * (period - r)).exp()) / (2.0 * (1.0 - e))
    }

    /// `max G = coth(κL) / 2κ`.
    pub fn periodized_max(&self, half_length: f64) -> f64 {
        self.periodized(0.0, half_length)
    }

    /// Constants of the discrete kernel operator on `grid`.
    ///
    /// The quadrature weights repeat with the interpolation group, so impulses
    /// at one group of nodes see every distinct column.
    pub fn discrete_constants(&self, grid: &Grid) -> DiscreteKernel {
        let n = grid.n_points();
        let h = grid.dx();
        let mut max_weight: f64 = 0.0;
        let mut max_mass: f64 = 0.0;
        let mut min_mass = f64::INFINITY;
        for j in 0..GROUP_MAX.min(n) {
            let mut v = vec![0.0; n];
            v[j] = 1.0 / h;
            let g = KernelSweeps::new(&Field::from_vec_unchecked(*grid, v), *self).solution();
            let mass = g.values().iter().sum::<f64>() * h;
            max_weight = max_weight.max(g.max());
            max_mass = max_mass.max(mass);
            min_mass = min_mass.min(mass);
        }
        DiscreteKernel {
            max_weight,
            max_mass,
            min_mass,
        }
    }
}

/// Largest Green-function value and the range of column masses of the
/// discrete kernel operator, normalized so that the continuum values are
/// `max G` and `1/κ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteKernel {
    pub max_weight: f64,
    pub max_mass: f64,
    pub min_mass: f64,
}

/// Pressure and its gradient from the kernel representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSolution {
    pub p: Field,
    pub dp: Field,
}

impl PressureSolution {
    pub fn zeros(grid: Grid) -> Self {
        PressureSolution {
            p: Field::zeros(grid),
            dp: Field::zeros(grid),
        }
    }
}

/// Polynomial coefficient storage; large enough for the quartic rule.
const DEG: usize = 5;
const GROUP_MAX: usize = DEG - 1;

/// Above this `κΔx` the quartic weights can turn negative, so the sweeps
/// fall back to piecewise-linear interpolation.
const QUARTIC_MAX_STEP: f64 = 0.5;

/// Cells per interpolation group: the source is replaced on each group
/// `[x_{gm}, x_{gm+g}]` by its degree-`g` interpolant.
fn group_size(lambda: f64, n: usize) -> usize {
    if lambda <= QUARTIC_MAX_STEP && n.is_multiple_of(4) {
        4
    } else {
        1
    }
}

/// `∫_0^a t^j e^{-λt} dt` for `j < DEG` and `λ >= 0`.
///
/// Written as `a^{j+1} e^{-x} Σ_m x^m j!/(j+1+m)!` with `x = λa`, which has
/// only positive terms; for large `x` the complementary form is used.
fn exp_moments(a: f64, lambda: f64) -> [f64; DEG] {
    let mut out = [0.0; DEG];
    if a <= 0.0 {
        return out;
    }
    let x = lambda * a;
    let ex = (-x).exp();
    for (j, slot) in out.iter_mut().enumerate() {
        if x < 30.0 {
            let mut term = 1.0 / (j + 1) as f64;
            let mut sum = term;
            let mut m = 1;
            while term > 1e-17 * sum {
                term *= x / (j + 1 + m) as f64;
                sum += term;
                m += 1;
            }
            *slot = a.powi(j as i32 + 1) * ex * sum;
        } else {
            // j!/λ^{j+1} (1 - e^{-x} Σ_{n<=j} x^n/n!)
            let mut partial = 0.0;
            let mut term = 1.0;
            let mut fact = 1.0;
            for n in 0..=j {
                if n > 0 {
                    term *= x / n as f64;
                    fact *= n as f64;
                }
                partial += term;
            }
            *slot = fact / lambda.powi(j as i32 + 1) * (1.0 - ex * partial);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients of `t ↦ q(α + σt)` for `σ = ±1`.
fn shift(q: &[f64; DEG], alpha: f64, sigma: f64) -> [f64; DEG] {
    let mut out = [0.0; DEG];
    for (m, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, c) in q.iter().enumerate().skip(m) {
            s += c * binomial(j, m) * alpha.powi((j - m) as i32);
        }
        *o = s * sigma.powi(m as i32);
    }
    out
}

fn dot(a: &[f64; DEG], b: &[f64; DEG]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `∫_α^β q(s) e^{-λ(s-α)} ds` for a polynomial given by monomial coefficients.
fn integral_from_start(q: &[f64; DEG], alpha: f64, beta: f64, lambda: f64) -> f64 {
    dot(&shift(q, alpha, 1.0), &exp_moments(beta - alpha, lambda))
}

/// `∫_α^β q(s) e^{-λ(β-s)} ds`.
fn integral_from_end(q: &[f64; DEG], alpha: f64, beta: f64, lambda: f64) -> f64 {
    dot(&shift(q, beta, -1.0), &exp_moments(beta - alpha, lambda))
}

/// Lagrange basis on nodes `s = 0, ..., group` as monomial coefficients.
fn lagrange_basis(group: usize) -> [[f64; DEG]; DEG] {
    let mut basis = [[0.0; DEG]; DEG];
    for (i, b) in basis.iter_mut().enumerate().take(group + 1) {
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for k in (0..=group).filter(|&k| k != i) {
            // poly *= (s - k)
            let mut next = vec![0.0; poly.len() + 1];
            for (d, c) in poly.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= c * k as f64;
            }
            poly = next;
            denom *= i as f64 - k as f64;
        }
        for (d, c) in poly.iter().enumerate() {
            b[d] = c / denom;
        }
    }
    basis
}

fn interpolant(values: &[f64; DEG], basis: &[[f64; DEG]; DEG]) -> [f64; DEG] {
    let mut q = [0.0; DEG];
    for (v, b) in values.iter().zip(basis) {
        for (c, bj) in q.iter_mut().zip(b) {
            *c += v * bj;
        }
    }
    q
}

/// Product-integration weights for one group, in units of `Δx`.
///
/// `left[s][i]` weights node `i` in `∫_0^s f e^{-λ(s-t)} dt`,
/// `right[s][i]` weights node `i` in `∫_s^G f e^{-λ(t-s)} dt`.
struct GroupWeights {
    left: [[f64; DEG]; DEG],
    right: [[f64; DEG]; DEG],
}

impl GroupWeights {
    fn new(lambda: f64, group: usize, basis: &[[f64; DEG]; DEG]) -> Self {
        let mut w = GroupWeights {
            left: [[0.0; DEG]; DEG],
            right: [[0.0; DEG]; DEG],
        };
        let g = group as f64;
        for s in 0..=group {
            for i in 0..=group {
                w.left[s][i] = integral_from_end(&basis[i], 0.0, s as f64, lambda);
                w.right[s][i] = integral_from_start(&basis[i], s as f64, g, lambda);
            }
        }
        w
    }
}

/// One-sided exponential integrals `Λ`, `Ρ` of a periodic source at every node.
pub struct KernelSweeps {
    grid: Grid,
    kappa: f64,
    group: usize,
    source: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl KernelSweeps {
    pub fn new(source: &Field, kernel: KernelSpec) -> Self {
        let grid = *source.grid();
        let n = grid.n_points();
        let h = grid.dx();
        let kappa = kernel.kappa();
        let lambda = kappa * h;
        let f = source.values();
        let group = group_size(lambda, n);
        let basis = lagrange_basis(group);
        let w = GroupWeights::new(lambda, group, &basis);
        let decay: Vec<f64> = (0..=group).map(|s| (-lambda * s as f64).exp()).collect();
        let groups = n / group;
        let wrap = 1.0 - (-2.0 * kappa * grid.half_length()).exp();
        let nodes = |p: usize| -> [f64; DEG] {
            let mut v = [0.0; DEG];
            for (i, slot) in v.iter_mut().enumerate().take(group + 1) {
                *slot = f[(group * p + i) % n];
            }
            v
        };

        let left_inc: Vec<f64> = (0..groups).map(|p| h * dot(&w.left[group], &nodes(p))).collect();
        let right_inc: Vec<f64> = (0..groups).map(|p| h * dot(&w.right[0], &nodes(p))).collect();

        // periodic closure: Λ_0 = Σ_k r^k A_{P-1-k} / (1 - r^P), r = e^{-Gλ}
        let r = decay[group];
        let mut left0 = 0.0;
        let mut right0 = 0.0;
        let mut factor = 1.0;
        for k in 0..groups {
            left0 += factor * left_inc[groups - 1 - k];
            right0 += factor * right_inc[k];
            factor *= r;
            if factor < 1e-300 {
                break;
            }
        }
        left0 /= wrap;
        right0 /= wrap;

        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        let mut base = left0;
        for p in 0..groups {
            let v = nodes(p);
            left[group * p] = base;
            for s in 1..group {
                left[group * p + s] = decay[s] * base + h * dot(&w.left[s], &v);
            }
            base = r * base + left_inc[p];
        }
        let mut next = right0; // Ρ at node N ≡ node 0
        for p in (0..groups).rev() {
            let v = nodes(p);
            for s in 1..group {
                right[group * p + s] = decay[group - s] * next + h * dot(&w.right[s], &v);
            }
            right[group * p] = r * next + right_inc[p];
            next = right[group * p];
        }

        KernelSweeps {
            grid,
            kappa,
            group,
            source: f.to_vec(),
            left,
            right,
        }
    }

    /// `g = (Λ + Ρ) / 2κ` at the nodes.
    pub fn solution(&self) -> Field {
        let scale = 0.5 / self.kappa;
        Field::from_vec_unchecked(
            self.grid,
            self.left
                .iter()
                .zip(&self.right)
                .map(|(l, r)| scale * (l + r))
                .collect(),
        )
    }

    /// `∂x g = (Ρ - Λ) / 2` at the nodes.
    ///
    /// The group quadrature is not translation invariant, so the node values
    /// carry a mean of order of the quadrature error; the derivative of a
    /// periodic function has none, and it is removed.
    pub fn gradient(&self) -> Field {
        let raw: Vec<f64> = self
            .left
            .iter()
            .zip(&self.right)
            .map(|(l, r)| 0.5 * (r - l))
            .collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        Field::from_vec_unchecked(self.grid, raw.into_iter().map(|v| v - mean).collect())
    }

    /// `(g(x), ∂x g(x))` at an arbitrary point, using the same quadrature.
    pub fn eval_at(&self, x: f64) -> (f64, f64) {
        let n = self.grid.n_points();
        let h = self.grid.dx();
        let lambda = self.kappa * h;
        let group = self.group;
        let g = group as f64;
        let s = (x + self.grid.half_length()).rem_euclid(self.grid.length()) / h;
        let p = ((s / g).floor() as usize).min(n / group - 1);
        let local = s - g * p as f64;
        let mut v = [0.0; DEG];
        for (i, slot) in v.iter_mut().enumerate().take(group + 1) {
            *slot = self.source[(group * p + i) % n];
        }
        let q = interpolant(&v, &lagrange_basis(group));
        let left = (-lambda * local).exp() * self.left[group * p]
            + h * integral_from_end(&q, 0.0, local, lambda);
        let right = (-lambda * (g - local)).exp() * self.right[(group * p + group) % n]
            + h * integral_from_start(&q, local, g, lambda);
        (0.5 * (left + right) / self.kappa, 0.5 * (right - left))
    }
}

fn spectral_solve(rhs: &Field, kappa: f64) -> (Field, Field) {
    let grid = *rhs.grid();
    let n = grid.n_points();
    let k2 = kappa * kappa;
    let mut coeffs = spectral::forward(rhs.values());
    for (j, c) in coeffs.iter_mut().enumerate() {
        let k = spectral::wavenumber(&grid, j);
        *c /= k2 + k * k;
    }
    let mut dcoeffs = coeffs.clone();
    for (j, c) in dcoeffs.iter_mut().enumerate() {
        if j == n / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, spectral::wavenumber(&grid, j));
        }
    }
    (
        Field::from_vec_unchecked(grid, spectral::inverse_real(coeffs)),
        Field::from_vec_unchecked(grid, spectral::inverse_real(dcoeffs)),
    )
}

/// Solves `(κ² - ∂xx) g = rhs` and returns `(g, ∂x g)`.
pub fn helmholtz_solve_with_gradient(
    rhs: &Field,
    kappa: f64,
    backend: HelmholtzBackend,
) -> Result<(Field, Field)> {
    let kernel = KernelSpec::new(kappa)?;
    Ok(match backend {
        HelmholtzBackend::Spectral => spectral_solve(rhs, kappa),
        HelmholtzBackend::Kernel => {
            let sweeps = KernelSweeps::new(rhs, kernel);
            (sweeps.solution(), sweeps.gradient())
        }
    })
}

/// Solves `(κ² - ∂xx) g = rhs` on the periodic domain.
pub fn helmholtz_solve(rhs: &Field, kappa: f64, backend: HelmholtzBackend) -> Result<Field> {
    helmholtz_solve_with_gradient(rhs, kappa, backend).map(|(g, _)| g)
}

fn pressure_source(u: &Field) -> Field {
    Field::from_vec_unchecked(*u.grid(), u.values().iter().map(|v| 1.5 * v * v).collect())
}

/// `(1 - ∂xx) p = (3/2) u²`, with `∂x p` from the differentiated kernel.
pub fn solve_pressure(u: &Field, backend: HelmholtzBackend) -> PressureSolution {
    let (p, dp) = helmholtz_solve_with_gradient(&pressure_source(u), 1.0, backend)
        .expect("kappa = 1 is valid");
    PressureSolution { p, dp }
}

/// Pressure and its gradient at an arbitrary point (kernel quadrature).
pub fn pressure_at(u: &Field, x: f64) -> (f64, f64) {
    KernelSweeps::new(&pressure_source(u), KernelSpec::pressure()).eval_at(x)
}

/// `y = (4 - ∂xx)^{-1} z`, solved spectrally.
pub fn solve_y(z: &Field) -> Field {
    spectral_solve(z, 2.0).0
}

/// Splits the pressure of `u = z + W` into the parts driven by `z²` and by `2zW + W²`.
pub fn split_pressure(z: &Field, w: &Field, backend: HelmholtzBackend) -> Result<(Field, Field)> {
    z.same_grid(w)?;
    let s1 = z.map(|v| 1.5 * v * v)?;
    let s2 = z.zip_map(w, |a, b| 1.5 * (2.0 * a * b + b * b))?;
    Ok((
        helmholtz_solve(&s1, 1.0, backend)?,
        helmholtz_solve(&s2, 1.0, backend)?,
    ))
}
