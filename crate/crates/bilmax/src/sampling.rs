//! Uniform grids, sampled functions, `L^p` norms, and tensor-product
//! evaluation `F(y, z) = f(y) g(z)`.
//!
//! Functions are nonnegative and compactly supported in
//! `[SUPPORT_MIN, SUPPORT_MAX]`; sampling reads the spec at cell midpoints
//! and clamps negative values to zero. A sampled function is interpreted as
//! piecewise constant on its grid cells, so tensor evaluation at an
//! arbitrary plane point is two cell lookups and a multiply.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Left edge of the admissible support of input functions.
pub const SUPPORT_MIN: f64 = -3.0;
/// Right edge of the admissible support of input functions.
pub const SUPPORT_MAX: f64 = 3.0;

/// Default working domain: operator fields are supported on `[-5, 5]`.
pub const DOMAIN_MIN: f64 = -5.0;
/// Right edge of the default working domain.
pub const DOMAIN_MAX: f64 = 5.0;
/// Default sample count for the working domain.
pub const DEFAULT_GRID_N: usize = 1 << 13;

/// A uniform one-dimensional grid of `n` cells on `[x_min, x_max]`.
///
/// Sample points are cell midpoints `x_i = x_min + (i + 1/2) h`, so an
/// indicator whose endpoints align with cell boundaries has an exact norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need n >= 2, got {n}")));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// The default working grid: `[-5, 5]` with `2^13` cells.
    pub fn default_working() -> Self {
        Self::new(DOMAIN_MIN, DOMAIN_MAX, DEFAULT_GRID_N).expect("default grid is valid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell spacing `h = (x_max - x_min) / n`.
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    /// Midpoint of cell `i`.
    pub fn midpoint(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.h()
    }

    /// Index of the cell containing `x`, or `None` outside the domain.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < self.x_min || x >= self.x_max {
            return None;
        }
        let idx = ((x - self.x_min) / self.h()) as usize;
        Some(idx.min(self.n - 1))
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.midpoint(i))
    }
}

/// Parameterized generator for sampled functions.
///
/// Text form (used by the CLI and stored in reports):
/// `indicator:a,b` | `bump:c,w` | `ramp` | `random:seed` | `const:c` |
/// `union:a1,b1;a2,b2;...`
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    /// Indicator of `[a, b)`.
    Indicator { a: f64, b: f64 },
    /// Smooth bump `exp(1 - 1/(1 - t^2))`, `t = (x - center)/width`,
    /// supported on `[center - width, center + width]`.
    Bump { center: f64, width: f64 },
    /// `x` on `[0, 1)`, zero elsewhere.
    Ramp,
    /// Independent uniform `[0, 1)` values on every cell whose midpoint
    /// lies in the admissible support; deterministic for a fixed seed.
    RandomUniform { seed: u64 },
    /// Constant `c` on the whole admissible support.
    Constant { value: f64 },
    /// Indicator of a finite union of `[a_i, b_i)`.
    IndicatorUnion { intervals: Vec<(f64, f64)> },
}

impl FunctionSpec {
    /// Support bounds implied by the spec parameters.
    pub fn support(&self) -> (f64, f64) {
        match self {
            FunctionSpec::Indicator { a, b } => (*a, *b),
            FunctionSpec::Bump { center, width } => (center - width, center + width),
            FunctionSpec::Ramp => (0.0, 1.0),
            FunctionSpec::RandomUniform { .. } | FunctionSpec::Constant { .. } => {
                (SUPPORT_MIN, SUPPORT_MAX)
            }
            FunctionSpec::IndicatorUnion { intervals } => intervals.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &(a, b)| (lo.min(a), hi.max(b)),
            ),
        }
    }

    /// Checks parameter sanity and the support constraint.
    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::Indicator { a, b } => {
                if !(a < b) {
                    return Err(Error::InvalidSpec(format!(
                        "indicator needs a < b, got {a},{b}"
                    )));
                }
            }
            FunctionSpec::Bump { width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "bump needs width > 0, got {width}"
                    )));
                }
            }
            FunctionSpec::Constant { value } => {
                if *value < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "constant must be nonnegative, got {value}"
                    )));
                }
            }
            FunctionSpec::Ramp | FunctionSpec::RandomUniform { .. } => {}
            FunctionSpec::IndicatorUnion { intervals } => {
                if intervals.is_empty() {
                    return Err(Error::InvalidSpec("union needs at least one interval".into()));
                }
                for &(a, b) in intervals {
                    if !(a < b) {
                        return Err(Error::InvalidSpec(format!(
                            "union interval needs a < b, got {a},{b}"
                        )));
                    }
                }
            }
        }
        let (lo, hi) = self.support();
        if lo < SUPPORT_MIN || hi > SUPPORT_MAX {
            return Err(Error::InvalidSpec(format!(
                "support [{lo}, {hi}] outside [{SUPPORT_MIN}, {SUPPORT_MAX}]"
            )));
        }
        Ok(())
    }

    fn eval_deterministic(&self, x: f64) -> f64 {
        match self {
            FunctionSpec::Indicator { a, b } => {
                if x >= *a && x < *b {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionSpec::Bump { center, width } => {
                let t = (x - center) / width;
                if t.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            }
            FunctionSpec::Ramp => {
                if (0.0..1.0).contains(&x) {
                    x
                } else {
                    0.0
                }
            }
            FunctionSpec::Constant { value } => {
                if (SUPPORT_MIN..SUPPORT_MAX).contains(&x) {
                    *value
                } else {
                    0.0
                }
            }
            FunctionSpec::IndicatorUnion { intervals } => {
                if intervals.iter().any(|&(a, b)| x >= a && x < b) {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionSpec::RandomUniform { .. } => unreachable!("random specs sample via rng"),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Indicator { a, b } => write!(f, "indicator:{a},{b}"),
            FunctionSpec::Bump { center, width } => write!(f, "bump:{center},{width}"),
            FunctionSpec::Ramp => write!(f, "ramp"),
            FunctionSpec::RandomUniform { seed } => write!(f, "random:{seed}"),
            FunctionSpec::Constant { value } => write!(f, "const:{value}"),
            FunctionSpec::IndicatorUnion { intervals } => {
                write!(f, "union:")?;
                for (k, (a, b)) in intervals.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{a},{b}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_real(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad real '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite real '{s}'")));
    }
    Ok(v)
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), t.trim()),
            None => (s, ""),
        };
        let spec = match head {
            "indicator" => {
                let (a, b) = tail
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("indicator needs a,b: '{s}'")))?;
                FunctionSpec::Indicator {
                    a: parse_real(a)?,
                    b: parse_real(b)?,
                }
            }
            "bump" => {
                let (c, w) = tail
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("bump needs c,w: '{s}'")))?;
                FunctionSpec::Bump {
                    center: parse_real(c)?,
                    width: parse_real(w)?,
                }
            }
            "ramp" => {
                if !tail.is_empty() {
                    return Err(Error::Parse(format!("ramp takes no arguments: '{s}'")));
                }
                FunctionSpec::Ramp
            }
            "random" => FunctionSpec::RandomUniform {
                seed: tail
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad seed '{tail}'")))?,
            },
            "const" => FunctionSpec::Constant {
                value: parse_real(tail)?,
            },
            "union" => {
                let mut intervals = Vec::new();
                for part in tail.split(';') {
                    let (a, b) = part
                        .split_once(',')
                        .ok_or_else(|| Error::Parse(format!("union needs a,b pairs: '{s}'")))?;
                    intervals.push((parse_real(a)?, parse_real(b)?));
                }
                FunctionSpec::IndicatorUnion { intervals }
            }
            other => {
                return Err(Error::Parse(format!("unknown function spec '{other}'")));
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A nonnegative function sampled at the midpoints of a uniform grid,
/// interpreted as piecewise constant on the cells and zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl SampledFunction {
    /// Wraps precomputed cell values. Rejects negative or non-finite entries.
    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "value count {} != grid n {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampled values must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-constant evaluation: the value of the cell containing `x`,
    /// zero outside the grid domain.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.grid.cell_of(x) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    /// Pointwise scaling by `c >= 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be >= 0, got {c}"
            )));
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        })
    }
}

/// Samples a spec at the grid midpoints, clamping negatives to zero.
pub fn sample_function(spec: &FunctionSpec, grid: &Grid1D) -> Result<SampledFunction> {
    spec.validate()?;
    let values = match spec {
        FunctionSpec::RandomUniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            grid.midpoints()
                .map(|x| {
                    let u: f64 = rng.random();
                    if (SUPPORT_MIN..SUPPORT_MAX).contains(&x) {
                        u
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        _ => grid
            .midpoints()
            .map(|x| spec.eval_deterministic(x).max(0.0))
            .collect(),
    };
    SampledFunction::from_values(*grid, values)
}

/// Midpoint-rule `L^p` norm: `(sum_i values[i]^p h)^(1/p)`, `p >= 1`.
pub fn lp_norm(f: &SampledFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("need p >= 1, got {p}")));
    }
    let h = f.grid.h();
    let sum: f64 = f.values.iter().map(|v| v.powf(p)).sum();
    Ok((sum * h).powf(1.0 / p))
}

/// Tensor product `F(y, z) = f(y) g(z)`; no 2-D storage.
#[derive(Debug, Clone)]
pub struct TensorFunction {
    f: SampledFunction,
    g: SampledFunction,
}

impl TensorFunction {
    pub fn new(f: SampledFunction, g: SampledFunction) -> Self {
        Self { f, g }
    }

    pub fn f(&self) -> &SampledFunction {
        &self.f
    }

    pub fn g(&self) -> &SampledFunction {
        &self.g
    }

    #[inline]
    pub fn eval(&self, y: f64, z: f64) -> f64 {
        self.f.eval(y) * self.g.eval(z)
    }

    /// `||F||_p = ||f||_p ||g||_p`; the 2-D norm factors through the tensor
    /// structure, so no plane integration is needed.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(lp_norm(&self.f, p)? * lp_norm(&self.g, p)?)
    }
}

/// Cellwise product of two functions on the same grid.
pub fn pointwise_product(a: &SampledFunction, b: &SampledFunction) -> Result<SampledFunction> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(
            "pointwise product needs matching grids".into(),
        ));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y)
        .collect();
    SampledFunction::from_values(a.grid, values)
}
