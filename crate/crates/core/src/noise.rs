//! Finite-rank additive noise `W(t, x) = Σ_k σ_k e_k(x) β_k(t)`.
//!
//! Brownian values are drawn from a counter-based generator keyed by
//! `(seed, level, index, mode)`, so a path can be refined by Brownian bridge
//! without disturbing the knots it already has, and two refinements of the
//! same coarse path always agree.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm, Field, Grid};

/// Spatial profile of one noise mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeShape {
    /// `exp(-(x - c)² / 2w²)`
    Gaussian { center: f64, width: f64 },
    /// `exp(-(x - c)² / 2w²) · cos(k(x - c) + φ)`
    ModulatedGaussian {
        center: f64,
        width: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl ModeShape {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ModeShape::Gaussian { center, width } => gauss(x - center, width),
            ModeShape::ModulatedGaussian {
                center,
                width,
                wavenumber,
                phase,
            } => {
                let d = x - center;
                gauss(d, width) * (wavenumber * d + phase).cos()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ModeShape::Gaussian { center, width } => {
                let d = x - center;
                -d / (width * width) * gauss(d, width)
            }
            ModeShape::ModulatedGaussian {
                center,
                width,
                wavenumber,
                phase,
            } => {
                let d = x - center;
                let arg = wavenumber * d + phase;
                gauss(d, width) * (-d / (width * width) * arg.cos() - wavenumber * arg.sin())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (center, width, extra) = match *self {
            ModeShape::Gaussian { center, width } => (center, width, 0.0),
            ModeShape::ModulatedGaussian {
                center,
                width,
                wavenumber,
                phase,
            } => (center, width, wavenumber + phase),
        };
        if !(center.is_finite() && extra.is_finite() && width.is_finite() && width > 0.0) {
            return Err(Error::Config(format!("invalid noise mode shape {self:?}")));
        }
        Ok(())
    }

    fn tag(&self) -> u64 {
        match self {
            ModeShape::Gaussian { .. } => 0,
            ModeShape::ModulatedGaussian { .. } => 1,
        }
    }

    fn params(&self) -> [f64; 4] {
        match *self {
            ModeShape::Gaussian { center, width } => [center, width, 0.0, 0.0],
            ModeShape::ModulatedGaussian {
                center,
                width,
                wavenumber,
                phase,
            } => [center, width, wavenumber, phase],
        }
    }

    fn from_tag(tag: u64, p: [f64; 4]) -> Result<Self> {
        match tag {
            0 => Ok(ModeShape::Gaussian {
                center: p[0],
                width: p[1],
            }),
            1 => Ok(ModeShape::ModulatedGaussian {
                center: p[0],
                width: p[1],
                wavenumber: p[2],
                phase: p[3],
            }),
            other => Err(Error::Format(format!("unknown mode shape tag {other}"))),
        }
    }
}

fn gauss(d: f64, w: f64) -> f64 {
    (-0.5 * d * d / (w * w)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMode {
    pub amplitude: f64,
    #[serde(flatten)]
    pub shape: ModeShape,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub modes: Vec<NoiseMode>,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    /// No modes: the deterministic equation.
    pub fn zero() -> Self {
        NoiseSpec::default()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.modes {
            if !(m.amplitude.is_finite() && m.amplitude >= 0.0) {
                return Err(Error::Config(format!(
                    "noise amplitude must be nonnegative, got {}",
                    m.amplitude
                )));
            }
            m.shape.validate()?;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.amplitude == 0.0)
    }

    /// Largest `σ_k |e_k|` over the two ends of the truncated domain.
    pub fn boundary_magnitude(&self, half_length: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let a = m.shape.value(-half_length).abs();
                let b = m.shape.value(half_length).abs();
                m.amplitude * a.max(b)
            })
            .fold(0.0, f64::max)
    }
}

/// Splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal draw determined only by its key.
fn keyed_normal(seed: u64, level: u32, index: u64, mode: u64) -> f64 {
    let key = mix(mix(mix(mix(seed) ^ level as u64) ^ index) ^ mode);
    ChaCha8Rng::seed_from_u64(key).sample(StandardNormal)
}

/// Derives the seed of ensemble member `member` from a base seed.
pub fn derive_seed(base: u64, member: u64) -> u64 {
    mix(base ^ mix(member.wrapping_add(0x5EED)))
}

/// A sampled path: Brownian values of every mode on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    spec: NoiseSpec,
    t_final: f64,
    level: u32,
    steps: usize,
    /// `beta[k][m] = β_k(t_m)`
    beta: Vec<Vec<f64>>,
}

/// Draws independent Brownian motions for every mode on `M` uniform steps.
pub fn sample_path(spec: &NoiseSpec, t_final: f64, steps: usize) -> Result<NoisePath> {
    spec.validate()?;
    if steps == 0 {
        return Err(Error::Config("noise path needs at least one time step".into()));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::Config(format!("horizon must be positive, got {t_final}")));
    }
    let sd = (t_final / steps as f64).sqrt();
    let beta = (0..spec.n_modes())
        .map(|k| {
            let mut b = Vec::with_capacity(steps + 1);
            let mut acc = 0.0;
            b.push(0.0);
            for m in 0..steps {
                acc += sd * keyed_normal(spec.seed, 0, m as u64, k as u64);
                b.push(acc);
            }
            b
        })
        .collect();
    Ok(NoisePath {
        spec: spec.clone(),
        t_final,
        level: 0,
        steps,
        beta,
    })
}

impl NoisePath {
    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n_steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps() as f64
    }

    pub fn knot_time(&self, m: usize) -> f64 {
        if m == self.n_steps() {
            self.t_final
        } else {
            m as f64 * self.dt()
        }
    }

    /// Brownian values of mode `k` at the knots.
    pub fn mode_values(&self, k: usize) -> &[f64] {
        &self.beta[k]
    }

    /// Doubles the time resolution by Brownian bridge; existing knots are kept.
    pub fn refine(&self) -> NoisePath {
        let level = self.level + 1;
        let sd = (self.dt() / 4.0).sqrt();
        let beta = self
            .beta
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let mut out = Vec::with_capacity(2 * b.len() - 1);
                for m in 0..b.len() - 1 {
                    out.push(b[m]);
                    let z = keyed_normal(self.spec.seed, level, m as u64, k as u64);
                    out.push(0.5 * (b[m] + b[m + 1]) + sd * z);
                }
                out.push(b[b.len() - 1]);
                out
            })
            .collect();
        NoisePath {
            spec: self.spec.clone(),
            t_final: self.t_final,
            level,
            steps: 2 * self.steps,
            beta,
        }
    }

    /// Refines until the knot spacing is at most `dt`.
    pub fn refine_to(&self, dt: f64) -> NoisePath {
        let mut path = self.clone();
        while path.dt() > dt && path.level < 40 {
            path = path.refine();
        }
        path
    }

    /// Piecewise-linear `β_k(t)` for every mode.
    pub fn beta_at(&self, t: f64) -> Result<Vec<f64>> {
        let slack = 1e-12 * self.t_final;
        if !(t >= -slack && t <= self.t_final + slack) {
            return Err(Error::Domain(format!(
                "t = {t} outside the path horizon [0, {}]",
                self.t_final
            )));
        }
        let t = t.clamp(0.0, self.t_final);
        let steps = self.n_steps();
        let s = t / self.dt();
        let m = (s.floor() as usize).min(steps - 1);
        let theta = s - m as f64;
        Ok(self
            .beta
            .iter()
            .map(|b| {
                if theta == 0.0 {
                    b[m]
                } else if theta == 1.0 {
                    b[m + 1]
                } else {
                    (1.0 - theta) * b[m] + theta * b[m + 1]
                }
            })
            .collect())
    }

    /// Precomputes `σ_k e_k` and `σ_k ∂x e_k` on a grid.
    pub fn sampler(&self, grid: Grid) -> NoiseSampler {
        let nodes: Vec<f64> = grid.nodes().collect();
        let profiles = self
            .spec
            .modes
            .iter()
            .map(|m| {
                (
                    nodes.iter().map(|&x| m.amplitude * m.shape.value(x)).collect(),
                    nodes.iter().map(|&x| m.amplitude * m.shape.derivative(x)).collect(),
                )
            })
            .collect();
        NoiseSampler { grid, profiles }
    }

    /// Pathwise regularity proxies over the knots of this path.
    pub fn regularity(&self, grid: Grid, q: f64) -> Result<RegularitySummary> {
        let sampler = self.sampler(grid);
        let mut summary = RegularitySummary {
            q,
            sup_l2: 0.0,
            sup_lq: 0.0,
            sup_dx_linf: 0.0,
            int_dx_linf_sq: 0.0,
        };
        let mut prev: Option<f64> = None;
        for m in 0..=self.n_steps() {
            let (w, dw) = sampler.eval(self, self.knot_time(m))?;
            summary.sup_l2 = summary.sup_l2.max(lp_norm(&w, 2.0)?);
            summary.sup_lq = summary.sup_lq.max(lp_norm(&w, q)?);
            let d = dw.max_abs();
            summary.sup_dx_linf = summary.sup_dx_linf.max(d);
            if let Some(p) = prev {
                summary.int_dx_linf_sq += 0.5 * self.dt() * (p * p + d * d);
            }
            prev = Some(d);
        }
        Ok(summary)
    }
}

/// Mode profiles sampled on a fixed grid.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    grid: Grid,
    profiles: Vec<(Vec<f64>, Vec<f64>)>,
}

impl NoiseSampler {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `(W(t), ∂x W(t))` on the sampler grid.
    pub fn eval(&self, path: &NoisePath, t: f64) -> Result<(Field, Field)> {
        let beta = path.beta_at(t)?;
        let n = self.grid.n_points();
        let mut w = vec![0.0; n];
        let mut dw = vec![0.0; n];
        for ((e, de), b) in self.profiles.iter().zip(&beta) {
            if *b == 0.0 {
                continue;
            }
            for i in 0..n {
                w[i] += e[i] * b;
                dw[i] += de[i] * b;
            }
        }
        Ok((
            Field::from_vec_unchecked(self.grid, w),
            Field::from_vec_unchecked(self.grid, dw),
        ))
    }
}

/// `(W(t), ∂x W(t))` on `grid`.
pub fn eval_w(path: &NoisePath, t: f64, grid: Grid) -> Result<(Field, Field)> {
    path.sampler(grid).eval(path, t)
}

/// Quantities entering the growth rates of the energy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularitySummary {
    pub q: f64,
    pub sup_l2: f64,
    pub sup_lq: f64,
    pub sup_dx_linf: f64,
    pub int_dx_linf_sq: f64,
}

const PATH_MAGIC: &[u8; 4] = b"SDPW";
const PATH_VERSION: u32 = 1;

impl NoisePath {
    /// Little-endian binary layout:
    ///
    /// ```text
    /// "SDPW" | version u32 | K u64 | M u64 | T f64 | seed u64 | level u32
    /// K × (tag u64 | amplitude f64 | 4 × shape parameter f64)
    /// K × (M + 1) × f64      β_k(t_m), mode-major
    /// ```
    pub fn to_bytes(&self) -> Vec<u8> {
        let k = self.spec.n_modes();
        let m = self.n_steps();
        let mut out = Vec::with_capacity(48 + k * 48 + k * (m + 1) * 8);
        out.extend_from_slice(PATH_MAGIC);
        out.extend_from_slice(&PATH_VERSION.to_le_bytes());
        out.extend_from_slice(&(k as u64).to_le_bytes());
        out.extend_from_slice(&(m as u64).to_le_bytes());
        out.extend_from_slice(&self.t_final.to_le_bytes());
        out.extend_from_slice(&self.spec.seed.to_le_bytes());
        out.extend_from_slice(&self.level.to_le_bytes());
        for mode in &self.spec.modes {
            out.extend_from_slice(&mode.shape.tag().to_le_bytes());
            out.extend_from_slice(&mode.amplitude.to_le_bytes());
            for p in mode.shape.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        for b in &self.beta {
            for v in b {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != PATH_MAGIC {
            return Err(Error::Format("not a noise path file".into()));
        }
        let version = r.u32()?;
        if version != PATH_VERSION {
            return Err(Error::Format(format!("unsupported noise path version {version}")));
        }
        let k = r.u64()? as usize;
        let m = r.u64()? as usize;
        let t_final = r.f64()?;
        let seed = r.u64()?;
        let level = r.u32()?;
        if m == 0 {
            return Err(Error::Format("noise path with zero steps".into()));
        }
        let mut modes = Vec::with_capacity(k);
        for _ in 0..k {
            let tag = r.u64()?;
            let amplitude = r.f64()?;
            let p = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
            modes.push(NoiseMode {
                amplitude,
                shape: ModeShape::from_tag(tag, p)?,
            });
        }
        let mut beta = Vec::with_capacity(k);
        for _ in 0..k {
            beta.push((0..=m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after noise path".into()));
        }
        Ok(NoisePath {
            spec: NoiseSpec { modes, seed },
            t_final,
            level,
            steps: m,
            beta,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

pub(crate) struct ByteReader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
