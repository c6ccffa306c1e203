//! Numerical laboratory for bilinear directional maximal operators centered
//! on the diagonal of the plane.
//!
//! The crate discretizes a family of bilinear averaging operators acting on
//! tensor products `F(y, z) = f(y) g(z)` of one-dimensional sampled
//! functions. Averages are taken over thin rectangles and parallelograms
//! centered at points `(x, x)` of the diagonal, and the operator value at a
//! diagonal coordinate `x` is the maximum average over a finite candidate
//! family (directions, lengths, widths, radii). On top of the operator
//! kernels sit covering diagnostics (level sets, greedy interval selection,
//! overlap functions of rectangle families) and a measurement harness that
//! estimates weak-type constants and sweeps them across the direction
//! separation parameter.
//!
//! Modules:
//! - [`sampling`]: grids, sampled functions, `L^p` norms, tensor evaluation.
//! - [`geometry`]: direction sets, rectangles, parallelograms, diagonal
//!   chords, and quadrature over regions.
//! - [`maximal`]: the discretized maximal operators and domination reports.
//! - [`covering`]: level sets, Vitali selection, family splitting, and the
//!   rasterized overlap norm.
//! - [`harness`]: weak-type constant measurement, parameter sweeps, the
//!   extremizer search, and CSV/JSON emission.
//!
//! ```
//! use bilmax::geometry::{DirectionSet, DEFAULT_QUADRATURE, DEFAULT_THETA_MAX};
//! use bilmax::harness::{lambda_grid, weak_type_constant, LAMBDA_RATIO, LAMBDA_SPAN};
//! use bilmax::maximal::m_delta;
//! use bilmax::sampling::{sample_function, Grid1D};
//!
//! let grid = Grid1D::new(-5.0, 5.0, 512)?;
//! let f = sample_function(&"indicator:0,1".parse()?, &grid)?;
//! let g = sample_function(&"bump:0,0.5".parse()?, &grid)?;
//! let delta = 0.0625;
//! let omega = DirectionSet::separated(delta, DEFAULT_THETA_MAX)?;
//! let field = m_delta(&f, &g, &grid, delta, &omega, DEFAULT_QUADRATURE)?;
//! let lambdas = lambda_grid(field.max_value(), LAMBDA_RATIO, LAMBDA_SPAN)?;
//! let report = weak_type_constant(&f, &g, &field, &lambdas, "indicator:0,1", "bump:0,0.5")?;
//! assert!(report.constant > 0.0);
//! # Ok::<(), bilmax::Error>(())
//! ```

// Parameter guards are written as `!(x > 0.0)` on purpose: the negated
// form rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covering;
pub mod geometry;
pub mod harness;
pub mod maximal;
pub mod sampling;

use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid function spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("empty schedule")]
    EmptySchedule,

    #[error("direction set mode mismatch: {0}")]
    DirectionModeMismatch(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("missing witness at grid index {0}")]
    MissingWitness(usize),

    #[error("lattice too coarse: spacing {spacing} exceeds {max_allowed}")]
    LatticeTooCoarse { spacing: f64, max_allowed: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
