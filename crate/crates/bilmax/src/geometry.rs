//! Direction sets, rectangles and parallelograms centered on the diagonal
//! `D = {(x, x)}`, diagonal chords, and quadrature of tensor functions over
//! these regions.
//!
//! Plane coordinates are `(y, z)`. The diagonal is identified with the real
//! line through `x <-> (x, x)`; intervals returned by chord computations
//! live in this diagonal coordinate, so a Euclidean chord of length `c`
//! has coordinate measure `c / sqrt(2)`.
//!
//! A rectangle is parameterized by its center on the diagonal, the angle of
//! its long axis measured from `D`, and its side lengths. Membership tests
//! are affine half-plane tests; region averages use a midpoint lattice
//! aligned with the region's own axes, optionally refined until stable.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use serde_json::json;

use crate::sampling::TensorFunction;
use crate::{Error, Result};

/// Default angular span of separated direction sets. Directions near the
/// diagonal are the interesting regime; the reflected half is redundant.
pub const DEFAULT_THETA_MAX: f64 = FRAC_PI_4;

/// Angle factor for the small-angle family: rectangles with
/// `angle <= ENCLOSURE_ANGLE_FACTOR * delta` admit a cheap parallelogram
/// enclosure with bounded area ratio.
pub const ENCLOSURE_ANGLE_FACTOR: f64 = 100.0;

/// A closed interval on the real line (diagonal coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi >= lo) {
            return Err(Error::InvalidParameter(format!(
                "interval needs hi >= lo, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn measure(&self) -> f64 {
        self.hi - self.lo
    }

    /// True when the interiors intersect (shared endpoints do not count).
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// How a direction set was built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectionMode {
    /// Uniform angles `{k delta}` with consecutive gaps `>= delta`.
    Separated { delta: f64 },
    /// Geometric angles `{2^-j : j = 0..=j_max}`.
    Lacunary { j_max: u32 },
}

/// A finite set of angles measured from the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    angles: Vec<f64>,
    mode: DirectionMode,
}

impl DirectionSet {
    /// Uniform `delta`-separated angles `{k delta : 0 <= k <= floor(theta_max/delta)}`.
    pub fn separated(delta: f64, theta_max: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need delta > 0, got {delta}"
            )));
        }
        if !(delta <= theta_max && theta_max <= FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "need delta <= theta_max <= pi/2, got delta={delta}, theta_max={theta_max}"
            )));
        }
        let k_max = (theta_max / delta) as usize;
        let angles = (0..=k_max).map(|k| k as f64 * delta).collect();
        Ok(Self {
            angles,
            mode: DirectionMode::Separated { delta },
        })
    }

    /// Lacunary angles `{2^-j : j = 0..=j_max}`, strictly decreasing in `j`.
    pub fn lacunary(j_max: u32) -> Self {
        let angles = (0..=j_max).map(|j| f64::powi(2.0, -(j as i32))).collect();
        Self {
            angles,
            mode: DirectionMode::Lacunary { j_max },
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn mode(&self) -> DirectionMode {
        self.mode
    }

    /// Extends the set with the reflections `-theta` of its positive
    /// angles, keeping the angles sorted. A symmetric window makes the
    /// directional operator invariant under swapping its two arguments.
    pub fn symmetrized(&self) -> DirectionSet {
        let mut angles: Vec<f64> = self
            .angles
            .iter()
            .copied()
            .filter(|a| *a > 0.0)
            .map(|a| -a)
            .collect();
        angles.reverse();
        angles.extend(self.angles.iter().copied());
        DirectionSet {
            angles,
            mode: self.mode,
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// An oriented rectangle in the plane, centered at `(center, center)` on the
/// diagonal, with the long axis at `angle` radians from the diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    center: f64,
    angle: f64,
    length: f64,
    width: f64,
}

impl Rectangle {
    pub fn new(center: f64, angle: f64, length: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && length >= width) {
            return Err(Error::InvalidParameter(format!(
                "rectangle needs length >= width > 0, got L={length}, W={width}"
            )));
        }
        if !center.is_finite() || !angle.is_finite() {
            return Err(Error::InvalidParameter(
                "rectangle center/angle must be finite".into(),
            ));
        }
        Ok(Self {
            center,
            angle,
            length,
            width,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Unit vectors of the long and short axes in `(y, z)` coordinates. The
    /// diagonal direction is at `pi/4` from the horizontal axis.
    #[inline]
    pub fn axes(&self) -> ((f64, f64), (f64, f64)) {
        let phi = self.angle + FRAC_PI_4;
        let (s, c) = phi.sin_cos();
        ((c, s), (-s, c))
    }

    /// Plane center `(center, center)`.
    pub fn plane_center(&self) -> (f64, f64) {
        (self.center, self.center)
    }

    /// Corners in cyclic order.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (u, v) = self.axes();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let (cy, cz) = self.plane_center();
        let corner = |su: f64, sv: f64| {
            (
                cy + su * hl * u.0 + sv * hw * v.0,
                cz + su * hl * u.1 + sv * hw * v.1,
            )
        };
        [
            corner(1.0, 1.0),
            corner(1.0, -1.0),
            corner(-1.0, -1.0),
            corner(-1.0, 1.0),
        ]
    }

    /// Affine half-plane membership test.
    #[inline]
    pub fn contains(&self, y: f64, z: f64) -> bool {
        let (u, v) = self.axes();
        let (dy, dz) = (y - self.center, z - self.center);
        let s = dy * u.0 + dz * u.1;
        let t = dy * v.0 + dz * v.1;
        s.abs() <= self.length / 2.0 && t.abs() <= self.width / 2.0
    }

    /// Euclidean length of the diagonal chord `R intersect D`:
    /// `min(L/cos th, W/sin th)` for `th` in `(0, pi/2]`, and `L` at `th = 0`.
    pub fn chord_length_euclidean(&self) -> f64 {
        let (s, c) = (self.angle.sin().abs(), self.angle.cos().abs());
        let by_length = if c > 0.0 { self.length / c } else { f64::INFINITY };
        let by_width = if s > 0.0 { self.width / s } else { f64::INFINITY };
        by_length.min(by_width)
    }

    /// The diagonal chord as an interval of diagonal coordinates, so its
    /// measure is the Euclidean chord divided by `sqrt(2)`.
    pub fn diagonal_chord(&self) -> Interval {
        let half = self.chord_length_euclidean() / SQRT_2 / 2.0;
        Interval {
            lo: self.center - half,
            hi: self.center + half,
        }
    }

    /// Diagnostic dyadic index: `ceil(log2(chord / width))`, clamped at 0.
    pub fn dyadic_chord_index(&self) -> u32 {
        let ratio = self.chord_length_euclidean() / self.width;
        ratio.log2().ceil().max(0.0) as u32
    }
}

/// A parallelogram centered at `(center, center)` with two vertical sides of
/// length `2 * half_height` and the other two parallel to the diagonal;
/// vertices are `(center +- half_length, center +- half_length +- half_height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parallelogram {
    center: f64,
    half_length: f64,
    half_height: f64,
}

impl Parallelogram {
    pub fn new(center: f64, half_length: f64, half_height: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_height > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "parallelogram needs positive half extents, got l={half_length}, w={half_height}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::InvalidParameter(
                "parallelogram center must be finite".into(),
            ));
        }
        Ok(Self {
            center,
            half_length,
            half_height,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn half_height(&self) -> f64 {
        self.half_height
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_height
    }

    pub fn vertices(&self) -> [(f64, f64); 4] {
        let (x, l, w) = (self.center, self.half_length, self.half_height);
        [
            (x + l, x + l + w),
            (x + l, x + l - w),
            (x - l, x - l - w),
            (x - l, x - l + w),
        ]
    }

    /// Membership: `|y - center| <= half_length` and `|z - y| <= half_height`.
    #[inline]
    pub fn contains(&self, y: f64, z: f64) -> bool {
        (y - self.center).abs() <= self.half_length && (z - y).abs() <= self.half_height
    }
}

/// Either region kind, for operations generic over both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Rect(Rectangle),
    Par(Parallelogram),
}

impl Region {
    pub fn area(&self) -> f64 {
        match self {
            Region::Rect(r) => r.area(),
            Region::Par(p) => p.area(),
        }
    }

    pub fn contains(&self, y: f64, z: f64) -> bool {
        match self {
            Region::Rect(r) => r.contains(y, z),
            Region::Par(p) => p.contains(y, z),
        }
    }

    /// JSON debug dump with corner coordinates, area, and angle.
    pub fn debug_json(&self) -> String {
        let value = match self {
            Region::Rect(r) => {
                let corners: Vec<[f64; 2]> = r.corners().iter().map(|&(y, z)| [y, z]).collect();
                json!({
                    "kind": "rectangle",
                    "center": r.center(),
                    "angle": r.angle(),
                    "length": r.length(),
                    "width": r.width(),
                    "area": r.area(),
                    "corners": corners,
                })
            }
            Region::Par(p) => {
                let corners: Vec<[f64; 2]> = p.vertices().iter().map(|&(y, z)| [y, z]).collect();
                json!({
                    "kind": "parallelogram",
                    "center": p.center(),
                    "angle": 0.0,
                    "half_length": p.half_length(),
                    "half_height": p.half_height(),
                    "area": p.area(),
                    "corners": corners,
                })
            }
        };
        value.to_string()
    }
}

/// Midpoint lattice dimensions for region averages: `n_long` nodes along the
/// long axis, `n_short` across.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub n_long: usize,
    pub n_short: usize,
}

impl Quadrature {
    pub const fn new(n_long: usize, n_short: usize) -> Self {
        Self { n_long, n_short }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_long == 0 || self.n_short < 4 {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs n_long >= 1 and n_short >= 4, got {}x{}",
                self.n_long, self.n_short
            )));
        }
        Ok(())
    }

    fn doubled(&self) -> Self {
        Self {
            n_long: self.n_long * 2,
            n_short: self.n_short * 2,
        }
    }
}

/// Default lattice per region. Regions are thin, so the lattice is much
/// denser along the long axis.
pub const DEFAULT_QUADRATURE: Quadrature = Quadrature::new(64, 8);

/// Relative tolerance for the auto-refined average.
pub const DEFAULT_REFINE_TOL: f64 = 1e-3;

#[inline]
pub(crate) fn rectangle_average(
    ff: &TensorFunction,
    center: f64,
    angle: f64,
    length: f64,
    width: f64,
    quad: Quadrature,
) -> f64 {
    let phi = angle + FRAC_PI_4;
    let (sp, cp) = phi.sin_cos();
    let (ux, uy) = (cp, sp);
    let (vx, vy) = (-sp, cp);
    let ds = length / quad.n_long as f64;
    let dt = width / quad.n_short as f64;
    let mut total = 0.0;
    for i in 0..quad.n_long {
        let s = -length / 2.0 + (i as f64 + 0.5) * ds;
        let base_y = center + s * ux;
        let base_z = center + s * uy;
        let mut row = 0.0;
        for j in 0..quad.n_short {
            let t = -width / 2.0 + (j as f64 + 0.5) * dt;
            row += ff.eval(base_y + t * vx, base_z + t * vy);
        }
        total += row;
    }
    total / (quad.n_long * quad.n_short) as f64
}

#[inline]
pub(crate) fn parallelogram_average(
    ff: &TensorFunction,
    center: f64,
    half_length: f64,
    half_height: f64,
    quad: Quadrature,
) -> f64 {
    let da = 2.0 * half_length / quad.n_long as f64;
    let db = 2.0 * half_height / quad.n_short as f64;
    let mut total = 0.0;
    for i in 0..quad.n_long {
        let a = -half_length + (i as f64 + 0.5) * da;
        let y = center + a;
        let fy = ff.f().eval(y);
        if fy == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..quad.n_short {
            let b = -half_height + (j as f64 + 0.5) * db;
            row += ff.g().eval(y + b);
        }
        total += fy * row;
    }
    total / (quad.n_long * quad.n_short) as f64
}

/// Midpoint-rule average of `F` over a region, on a lattice aligned with the
/// region's axes.
pub fn average_over_region(ff: &TensorFunction, region: &Region, quad: Quadrature) -> Result<f64> {
    quad.validate()?;
    if !(region.area() > 0.0) {
        return Err(Error::DegenerateRegion(format!(
            "area {} is not positive",
            region.area()
        )));
    }
    Ok(match region {
        Region::Rect(r) => {
            rectangle_average(ff, r.center(), r.angle(), r.length(), r.width(), quad)
        }
        Region::Par(p) => {
            parallelogram_average(ff, p.center(), p.half_length(), p.half_height(), quad)
        }
    })
}

/// Average refined by doubling the lattice until two successive refinements
/// differ by less than `rel_tol` relative (at most six doublings).
pub fn average_over_region_refined(
    ff: &TensorFunction,
    region: &Region,
    quad: Quadrature,
    rel_tol: f64,
) -> Result<f64> {
    let mut q = quad;
    let mut prev = average_over_region(ff, region, q)?;
    for _ in 0..6 {
        q = q.doubled();
        let next = average_over_region(ff, region, q)?;
        if (next - prev).abs() <= rel_tol * next.abs().max(1e-300) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Smallest diagonal-aligned parallelogram of the `P_{x,l,w}` family
/// containing the rectangle, padded by a relative margin so membership
/// survives rounding.
///
/// For a point of the rectangle at axis offsets `(s, t)`, the horizontal
/// deviation is `|y - x| = |s (cos th - sin th) - t (cos th + sin th)| / sqrt(2)`
/// and the vertical-shear deviation is `|z - y| = sqrt(2) |s sin th + t cos th|`;
/// maximizing over the rectangle gives the half extents below.
pub fn enclosing_parallelogram(r: &Rectangle) -> Parallelogram {
    let margin = 1.0 + 1e-12;
    let (hl, hw) = (r.length() / 2.0, r.width() / 2.0);
    let (s, c) = (r.angle().sin().abs(), r.angle().cos().abs());
    let horiz = (hl * (r.angle().cos() - r.angle().sin()).abs()
        + hw * (r.angle().cos() + r.angle().sin()).abs())
        / SQRT_2;
    let shear = SQRT_2 * (hl * s + hw * c);
    Parallelogram::new(r.center(), horiz * margin, shear * margin)
        .expect("enclosure extents are positive")
}
