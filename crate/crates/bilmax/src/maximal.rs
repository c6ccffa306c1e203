//! Discretized maximal operators: the one-dimensional averaging maximum,
//! its vertical variant on tensor functions, the diagonal parallelogram
//! operator, the directional rectangle operator over separated directions,
//! and the lacunary-direction operator.
//!
//! Every continuum supremum becomes a maximum over a finite schedule
//! (geometric in radii and extents, a finite direction set in angle). Each
//! field value stores a witness, the region parameters achieving the
//! maximum, so any entry can be reproduced by re-evaluating one average.

use rayon::prelude::*;

use crate::geometry::{
    parallelogram_average, rectangle_average, DirectionMode, DirectionSet, Parallelogram,
    Quadrature, Rectangle, Region,
};
use crate::sampling::{Grid1D, SampledFunction, TensorFunction};
use crate::{Error, Result};

/// Maximum allowed ratio of a radius schedule for the averaging maximum.
pub const MAX_RADIUS_RATIO: f64 = std::f64::consts::SQRT_2;

/// Default ratio for radius schedules: fine enough that the schedule
/// maximum sits within ~1.1% of the continuum supremum.
pub const DEFAULT_RADIUS_RATIO: f64 = 1.0108892860517005; // 2^(1/64)

/// Largest radius of the default averaging window schedule.
pub const MAX_RADIUS: f64 = 10.0;

/// Largest half-length of the default parallelogram schedule.
pub const MAX_PARALLELOGRAM_HALF_LENGTH: f64 = 5.0;

/// Fixed long side of separated-direction rectangles.
pub const DELTA_RECTANGLE_LENGTH: f64 = 1.0;

/// Largest side of lacunary rectangle shapes.
pub const MAX_LACUNARY_LENGTH: f64 = 1.0;

/// A finite increasing schedule of positive scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule(Vec<f64>);

impl Schedule {
    /// Geometric schedule `lo, lo*ratio, ...` up to the first value `>= hi`.
    pub fn geometric(lo: f64, hi: f64, ratio: f64) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "schedule needs 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "schedule ratio must exceed 1, got {ratio}"
            )));
        }
        let mut values = vec![lo];
        let mut v = lo;
        while v < hi {
            v *= ratio;
            values.push(v);
        }
        Ok(Self(values))
    }

    /// Dyadic schedule (ratio 2). The first value is `lo` and the last is
    /// the first value `>= hi`, so the range is covered but the top may
    /// overshoot; use [`Schedule::dyadic_down`] when `hi` is a hard cap.
    pub fn dyadic(lo: f64, hi: f64) -> Result<Self> {
        Self::geometric(lo, hi, 2.0)
    }

    /// Dyadic schedule `{hi, hi/2, hi/4, ...}` down to the last value
    /// `>= lo`, returned ascending. All values stay within `[lo, hi]`.
    pub fn dyadic_down(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && lo.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "schedule needs 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        let mut values = Vec::new();
        let mut v = hi;
        while v >= lo {
            values.push(v);
            v /= 2.0;
        }
        values.reverse();
        Ok(Self(values))
    }

    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite schedule values"));
        if values.is_empty() {
            return Err(Error::EmptySchedule);
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "schedule values must be positive and finite".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn max_consecutive_ratio(&self) -> f64 {
        self.0
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(1.0, f64::max)
    }
}

/// Default radius schedule for the averaging maximum on a grid of spacing `h`.
pub fn default_radius_schedule(h: f64) -> Result<Schedule> {
    Schedule::geometric(h, MAX_RADIUS, DEFAULT_RADIUS_RATIO)
}

/// Default dyadic half-length/half-height schedules for the parallelogram
/// operator, inside `[h, 5]`.
pub fn default_parallelogram_schedules(h: f64) -> Result<(Schedule, Schedule)> {
    let s = Schedule::dyadic_down(h, MAX_PARALLELOGRAM_HALF_LENGTH)?;
    Ok((s.clone(), s))
}

/// Default dyadic length/width schedules for lacunary rectangle shapes,
/// inside `[h, 1]`.
pub fn default_shape_schedules(h: f64) -> Result<(Schedule, Schedule)> {
    let s = Schedule::dyadic_down(h, MAX_LACUNARY_LENGTH)?;
    Ok((s.clone(), s))
}

/// Which operator produced a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorTag {
    M1,
    MDelta { delta: f64 },
    MLac { j_max: u32 },
    MDiag,
}

impl OperatorTag {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorTag::M1 => "m1",
            OperatorTag::MDelta { .. } => "mdelta",
            OperatorTag::MLac { .. } => "mlac",
            OperatorTag::MDiag => "mdiag",
        }
    }
}

/// Region parameters achieving a field value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness {
    /// Centered window of the averaging maximum.
    Ball { radius: f64 },
    /// Diagonal parallelogram half extents.
    Par { half_length: f64, half_height: f64 },
    /// Oriented rectangle parameters.
    Rect { angle: f64, length: f64, width: f64 },
}

impl Witness {
    /// The plane region at a given diagonal center, when the witness is
    /// two-dimensional.
    pub fn region_at(&self, center: f64) -> Option<Region> {
        match *self {
            Witness::Ball { .. } => None,
            Witness::Par {
                half_length,
                half_height,
            } => Parallelogram::new(center, half_length, half_height)
                .ok()
                .map(Region::Par),
            Witness::Rect {
                angle,
                length,
                width,
            } => Rectangle::new(center, angle, length, width)
                .ok()
                .map(Region::Rect),
        }
    }
}

/// Operator output values on a center grid, with one witness per point.
#[derive(Debug, Clone)]
pub struct MaximalField {
    grid: Grid1D,
    values: Vec<f64>,
    witnesses: Vec<Witness>,
    tag: OperatorTag,
    quad: Quadrature,
}

impl MaximalField {
    /// Assembles a field from precomputed parts. Lengths must match the
    /// grid and values must be finite and nonnegative.
    pub fn from_parts(
        grid: Grid1D,
        values: Vec<f64>,
        witnesses: Vec<Witness>,
        tag: OperatorTag,
        quad: Quadrature,
    ) -> Result<Self> {
        if values.len() != grid.n() || witnesses.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "field parts have {} values and {} witnesses for a grid of {}",
                values.len(),
                witnesses.len(),
                grid.n()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "field values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            grid,
            values,
            witnesses,
            tag,
            quad,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn witnesses(&self) -> &[Witness] {
        &self.witnesses
    }

    pub fn tag(&self) -> OperatorTag {
        self.tag
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quad
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Reinterprets the field values as a sampled function (for composing
    /// operators, e.g. averaging maxima of products).
    pub fn to_sampled_function(&self) -> Result<SampledFunction> {
        SampledFunction::from_values(self.grid, self.values.clone())
    }

    /// Recomputes the average over the stored witness region at index `i`.
    /// `f` is the first argument of the operator; `g` is needed for the
    /// bilinear tags and ignored for the averaging maximum.
    pub fn evaluate_witness(
        &self,
        i: usize,
        f: &SampledFunction,
        g: Option<&SampledFunction>,
    ) -> Result<f64> {
        let witness = self
            .witnesses
            .get(i)
            .copied()
            .ok_or(Error::MissingWitness(i))?;
        let x = self.grid.midpoint(i);
        match witness {
            Witness::Ball { radius } => {
                let prefix = PrefixIntegral::new(f);
                Ok(prefix.window_average(x, radius))
            }
            _ => {
                let g = g.ok_or_else(|| {
                    Error::InvalidParameter("bilinear witness needs g".into())
                })?;
                let ff = TensorFunction::new(f.clone(), g.clone());
                let region = witness
                    .region_at(x)
                    .ok_or(Error::MissingWitness(i))?;
                Ok(match region {
                    Region::Rect(r) => {
                        rectangle_average(&ff, r.center(), r.angle(), r.length(), r.width(), self.quad)
                    }
                    Region::Par(p) => parallelogram_average(
                        &ff,
                        p.center(),
                        p.half_length(),
                        p.half_height(),
                        self.quad,
                    ),
                })
            }
        }
    }
}

/// Exact running integral of a piecewise-constant sampled function, for
/// O(1) centered window averages.
pub(crate) struct PrefixIntegral<'a> {
    x_min: f64,
    x_max: f64,
    h: f64,
    n: usize,
    values: &'a [f64],
    prefix: Vec<f64>,
}

impl<'a> PrefixIntegral<'a> {
    pub fn new(f: &'a SampledFunction) -> Self {
        let grid = f.grid();
        let h = grid.h();
        let values = f.values();
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in values {
            acc += v * h;
            prefix.push(acc);
        }
        Self {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            h,
            n: grid.n(),
            values,
            prefix,
        }
    }

    /// Integral of the step function over `(-inf, x]`.
    #[inline]
    fn cumulative(&self, x: f64) -> f64 {
        if x <= self.x_min {
            return 0.0;
        }
        if x >= self.x_max {
            return self.prefix[self.n];
        }
        let t = (x - self.x_min) / self.h;
        let i = (t as usize).min(self.n - 1);
        self.prefix[i] + (t - i as f64) * self.h * self.values[i]
    }

    /// Centered average `(1/2r) int_{x-r}^{x+r} f`.
    #[inline]
    pub fn window_average(&self, x: f64, r: f64) -> f64 {
        (self.cumulative(x + r) - self.cumulative(x - r)) / (2.0 * r)
    }
}

fn validate_radius_schedule(radii: &Schedule) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let worst = radii.max_consecutive_ratio();
    if worst > MAX_RADIUS_RATIO * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "radius schedule ratio {worst} exceeds sqrt(2)"
        )));
    }
    Ok(())
}

/// Centered averaging maximum of `f` over the radius schedule, evaluated at
/// every midpoint of `f`'s own grid.
pub fn m1_maximal(f: &SampledFunction, radii: &Schedule) -> Result<MaximalField> {
    validate_radius_schedule(radii)?;
    let prefix = PrefixIntegral::new(f);
    let grid = *f.grid();
    let results: Vec<(f64, Witness)> = (0..grid.n())
        .into_par_iter()
        .map(|i| {
            let x = grid.midpoint(i);
            let mut best = f64::NEG_INFINITY;
            let mut best_r = radii.values()[0];
            for &r in radii.values() {
                let avg = prefix.window_average(x, r);
                if avg > best {
                    best = avg;
                    best_r = r;
                }
            }
            (best.max(0.0), Witness::Ball { radius: best_r })
        })
        .collect();
    let (values, witnesses) = results.into_iter().unzip();
    Ok(MaximalField {
        grid,
        values,
        witnesses,
        tag: OperatorTag::M1,
        quad: crate::geometry::DEFAULT_QUADRATURE,
    })
}

/// Vertical averaging maximum of the tensor function at a plane point:
/// `sup_w (1/2w) int F(y, z+s) ds`, which factors exactly as
/// `f(y) * (M_1 g)(z)` for tensor inputs.
pub fn m_vertical(ff: &TensorFunction, y: f64, z: f64, widths: &Schedule) -> Result<f64> {
    validate_radius_schedule(widths)?;
    let fy = ff.f().eval(y);
    if fy == 0.0 {
        return Ok(0.0);
    }
    let prefix = PrefixIntegral::new(ff.g());
    let mut best = 0.0f64;
    for &w in widths.values() {
        best = best.max(prefix.window_average(z, w));
    }
    Ok(fy * best)
}

fn bilinear_field<FPer>(
    centers: &Grid1D,
    tag: OperatorTag,
    quad: Quadrature,
    per_center: FPer,
) -> MaximalField
where
    FPer: Fn(f64) -> (f64, Witness) + Sync,
{
    let results: Vec<(f64, Witness)> = (0..centers.n())
        .into_par_iter()
        .map(|i| per_center(centers.midpoint(i)))
        .collect();
    let (values, witnesses) = results.into_iter().unzip();
    MaximalField {
        grid: *centers,
        values,
        witnesses,
        tag,
        quad,
    }
}

/// Diagonal parallelogram operator: maximum over dyadic `(l, w)` with
/// `w <= l` of the average of `f(y) g(z)` over the parallelogram with half
/// extents `(l, w)` centered at `(x, x)`.
pub fn m_diag(
    f: &SampledFunction,
    g: &SampledFunction,
    centers: &Grid1D,
    l_schedule: &Schedule,
    w_schedule: &Schedule,
    quad: Quadrature,
) -> Result<MaximalField> {
    if l_schedule.is_empty() || w_schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    quad.validate()?;
    let ff = TensorFunction::new(f.clone(), g.clone());
    let field = bilinear_field(centers, OperatorTag::MDiag, quad, |x| {
        let mut best = f64::NEG_INFINITY;
        let mut best_w = Witness::Par {
            half_length: l_schedule.values()[0],
            half_height: w_schedule.values()[0],
        };
        for &l in l_schedule.values() {
            for &w in w_schedule.values() {
                if w > l * (1.0 + 1e-12) {
                    break;
                }
                let avg = parallelogram_average(&ff, x, l, w, quad);
                if avg > best {
                    best = avg;
                    best_w = Witness::Par {
                        half_length: l,
                        half_height: w,
                    };
                }
            }
        }
        (best.max(0.0), best_w)
    });
    Ok(field)
}

/// Directional rectangle operator: maximum over the separated direction set
/// of the average over the `1 x delta` rectangle at each direction.
pub fn m_delta(
    f: &SampledFunction,
    g: &SampledFunction,
    centers: &Grid1D,
    delta: f64,
    omega: &DirectionSet,
    quad: Quadrature,
) -> Result<MaximalField> {
    match omega.mode() {
        DirectionMode::Separated { delta: d } => {
            if (d - delta).abs() > 1e-12 * delta.abs().max(1e-300) {
                return Err(Error::DirectionModeMismatch(format!(
                    "direction set built for delta {d}, operator called with {delta}"
                )));
            }
        }
        DirectionMode::Lacunary { .. } => {
            return Err(Error::DirectionModeMismatch(
                "separated directions required, got lacunary".into(),
            ));
        }
    }
    if omega.is_empty() {
        return Err(Error::EmptySchedule);
    }
    if !(delta > 0.0 && delta <= DELTA_RECTANGLE_LENGTH) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < delta <= {DELTA_RECTANGLE_LENGTH}, got {delta}"
        )));
    }
    quad.validate()?;
    let ff = TensorFunction::new(f.clone(), g.clone());
    let field = bilinear_field(centers, OperatorTag::MDelta { delta }, quad, |x| {
        let mut best = f64::NEG_INFINITY;
        let mut best_angle = omega.angles()[0];
        for &theta in omega.angles() {
            let avg = rectangle_average(&ff, x, theta, DELTA_RECTANGLE_LENGTH, delta, quad);
            if avg > best {
                best = avg;
                best_angle = theta;
            }
        }
        (
            best.max(0.0),
            Witness::Rect {
                angle: best_angle,
                length: DELTA_RECTANGLE_LENGTH,
                width: delta,
            },
        )
    });
    Ok(field)
}

/// Best rectangle average over all admissible `(length, width)` shapes at a
/// single direction.
fn best_shape_at_angle(
    ff: &TensorFunction,
    x: f64,
    theta: f64,
    lengths: &Schedule,
    widths: &Schedule,
    quad: Quadrature,
) -> (f64, Witness) {
    let mut best = f64::NEG_INFINITY;
    let mut best_w = Witness::Rect {
        angle: theta,
        length: lengths.values()[0],
        width: widths.values()[0].min(lengths.values()[0]),
    };
    for &length in lengths.values() {
        for &width in widths.values() {
            if width > length * (1.0 + 1e-12) {
                break;
            }
            let avg = rectangle_average(ff, x, theta, length, width.min(length), quad);
            if avg > best {
                best = avg;
                best_w = Witness::Rect {
                    angle: theta,
                    length,
                    width: width.min(length),
                };
            }
        }
    }
    (best.max(0.0), best_w)
}

/// Per-direction partial fields for the lacunary operator: entry `j` holds,
/// for every center, the best average among shapes at angle `2^-j`. Folding
/// a prefix of these with a running maximum gives the operator at any
/// `j_max` in one pass.
pub(crate) fn lacunary_direction_bests(
    ff: &TensorFunction,
    centers: &Grid1D,
    j_max: u32,
    lengths: &Schedule,
    widths: &Schedule,
    quad: Quadrature,
) -> Vec<Vec<(f64, Witness)>> {
    let omega = DirectionSet::lacunary(j_max);
    omega
        .angles()
        .iter()
        .map(|&theta| {
            (0..centers.n())
                .into_par_iter()
                .map(|i| best_shape_at_angle(ff, centers.midpoint(i), theta, lengths, widths, quad))
                .collect()
        })
        .collect()
}

pub(crate) fn fold_direction_bests(
    centers: &Grid1D,
    per_direction: &[Vec<(f64, Witness)>],
    j_max: u32,
    quad: Quadrature,
) -> MaximalField {
    let take = (j_max as usize + 1).min(per_direction.len());
    let n = centers.n();
    let mut values = vec![f64::NEG_INFINITY; n];
    let mut witnesses = vec![per_direction[0][0].1; n];
    for direction in &per_direction[..take] {
        for i in 0..n {
            let (v, w) = direction[i];
            if v > values[i] {
                values[i] = v;
                witnesses[i] = w;
            }
        }
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    MaximalField {
        grid: *centers,
        values,
        witnesses,
        tag: OperatorTag::MLac { j_max },
        quad,
    }
}

/// Lacunary-direction operator: maximum over angles `2^-j`, `j <= j_max`,
/// and dyadic rectangle shapes `width <= length <= 1`.
pub fn m_lac(
    f: &SampledFunction,
    g: &SampledFunction,
    centers: &Grid1D,
    j_max: u32,
    lengths: &Schedule,
    widths: &Schedule,
    quad: Quadrature,
) -> Result<MaximalField> {
    if lengths.is_empty() || widths.is_empty() {
        return Err(Error::EmptySchedule);
    }
    quad.validate()?;
    let ff = TensorFunction::new(f.clone(), g.clone());
    let per_direction = lacunary_direction_bests(&ff, centers, j_max, lengths, widths, quad);
    Ok(fold_direction_bests(centers, &per_direction, j_max, quad))
}

/// Result of a pointwise domination check `A <= threshold * B`.
#[derive(Debug, Clone, Copy)]
pub struct DominationReport {
    /// Largest observed `A/B` over points where `B > 0`.
    pub max_ratio: f64,
    /// Center coordinate achieving the maximum ratio.
    pub argmax_x: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub points_compared: usize,
}

/// Compares two fields on the same grid: the maximum of `A/B` over points
/// where `B > 0`, with a pass/fail verdict against the threshold.
pub fn domination_report(
    a: &MaximalField,
    b: &MaximalField,
    threshold: f64,
) -> Result<DominationReport> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(
            "domination report needs matching grids".into(),
        ));
    }
    let mut max_ratio = 0.0f64;
    let mut argmax = None;
    let mut compared = 0usize;
    for i in 0..a.grid.n() {
        let denom = b.values[i];
        if denom > 0.0 {
            compared += 1;
            let ratio = a.values[i] / denom;
            if ratio > max_ratio {
                max_ratio = ratio;
                argmax = Some(a.grid.midpoint(i));
            }
        }
    }
    Ok(DominationReport {
        max_ratio,
        argmax_x: argmax,
        threshold,
        pass: max_ratio <= threshold,
        points_compared: compared,
    })
}
