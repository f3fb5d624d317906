//! Channel geometry: circular arcs through three points, straight segments, and
//! equal-interval sampling along either.

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum pairwise distance (mm) between defining points.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-6;
/// Triangle area over longest edge squared below which three points count as collinear.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-9;

/// A fixation channel centerline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    Arc(ArcChannel),
    Straight(StraightChannel),
}

/// Circular arc from `entry` to `exit` through `mid`.
///
/// The arc starts at `entry` and turns by `sweep` radians about `normal` (right-hand
/// rule). `normal` is oriented so that `sweep` is positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcChannel {
    pub entry: Point3<f64>,
    pub mid: Point3<f64>,
    pub exit: Point3<f64>,
    pub center: Point3<f64>,
    pub radius: f64,
    pub normal: Vector3<f64>,
    pub sweep: f64,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StraightChannel {
    pub entry: Point3<f64>,
    pub exit: Point3<f64>,
    pub length: f64,
}

fn check_distinct(points: &[Point3<f64>]) -> Result<()> {
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if (a - b).norm() <= COINCIDENCE_TOLERANCE {
                return Err(Error::CoincidentPoints(format!("{a:?} and {b:?}")));
            }
        }
    }
    Ok(())
}

/// The unique circular arc from `entry` to `exit` passing through `mid`.
///
/// Nearly collinear triples (area ratio below [`COLLINEARITY_TOLERANCE`]) produce a
/// straight channel from `entry` to `exit` instead.
pub fn arc_through_points(entry: Point3<f64>, mid: Point3<f64>, exit: Point3<f64>) -> Result<Channel> {
    check_distinct(&[entry, mid, exit])?;
    let u = mid - entry;
    let v = exit - entry;
    let w = u.cross(&v);
    let longest_sq = u.norm_squared().max(v.norm_squared()).max((exit - mid).norm_squared());
    let area = 0.5 * w.norm();
    if area / longest_sq < COLLINEARITY_TOLERANCE {
        return straight_through_points(entry, exit);
    }
    let center = entry + (v.cross(&w) * u.norm_squared() + w.cross(&u) * v.norm_squared()) / (2.0 * w.norm_squared());
    let radius = (entry - center).norm();
    let normal = w.normalize();
    // entry -> mid -> exit turns counter-clockwise about `normal`, so the arc through mid
    // is the one swept by the positive angle from entry to exit.
    let e1 = (entry - center) / radius;
    let e2 = normal.cross(&e1);
    let rel = exit - center;
    let mut sweep = rel.dot(&e2).atan2(rel.dot(&e1));
    if sweep <= 0.0 {
        sweep += std::f64::consts::TAU;
    }
    Ok(Channel::Arc(ArcChannel {
        entry,
        mid,
        exit,
        center,
        radius,
        normal,
        sweep,
        length: radius * sweep,
    }))
}

/// Zero-curvature channel from `entry` to `exit`.
pub fn straight_through_points(entry: Point3<f64>, exit: Point3<f64>) -> Result<Channel> {
    check_distinct(&[entry, exit])?;
    Ok(Channel::Straight(StraightChannel {
        entry,
        exit,
        length: (exit - entry).norm(),
    }))
}

impl ArcChannel {
    #[inline]
    fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let e1 = (self.entry - self.center) / self.radius;
        (e1, self.normal.cross(&e1))
    }

    #[inline]
    fn point_with_basis(&self, (e1, e2): (Vector3<f64>, Vector3<f64>), s: f64) -> Point3<f64> {
        let (sin, cos) = (s / self.radius).sin_cos();
        self.center + (e1 * cos + e2 * sin) * self.radius
    }
}

impl Channel {
    pub fn entry(&self) -> Point3<f64> {
        match self {
            Channel::Arc(a) => a.entry,
            Channel::Straight(s) => s.entry,
        }
    }

    pub fn exit(&self) -> Point3<f64> {
        match self {
            Channel::Arc(a) => a.exit,
            Channel::Straight(s) => s.exit,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Channel::Arc(a) => a.length,
            Channel::Straight(s) => s.length,
        }
    }

    /// 1/R for arcs, exactly 0 for straight channels (1/mm).
    pub fn curvature(&self) -> f64 {
        match self {
            Channel::Arc(a) => 1.0 / a.radius,
            Channel::Straight(_) => 0.0,
        }
    }

    /// Radius in mm; infinite for straight channels.
    pub fn radius(&self) -> f64 {
        match self {
            Channel::Arc(a) => a.radius,
            Channel::Straight(_) => f64::INFINITY,
        }
    }

    pub fn is_straight(&self) -> bool {
        matches!(self, Channel::Straight(_))
    }

    /// Point at arc length `s` from the entry.
    pub fn point_at(&self, s: f64) -> Point3<f64> {
        match self {
            Channel::Arc(a) => a.point_with_basis(a.basis(), s),
            Channel::Straight(l) => l.entry + (l.exit - l.entry) * (s / l.length),
        }
    }

    /// Same curve traversed from exit to entry.
    pub fn reversed(&self) -> Channel {
        match self {
            Channel::Arc(a) => Channel::Arc(ArcChannel {
                entry: a.exit,
                mid: a.mid,
                exit: a.entry,
                center: a.center,
                radius: a.radius,
                normal: -a.normal,
                sweep: a.sweep,
                length: a.length,
            }),
            Channel::Straight(s) => Channel::Straight(StraightChannel {
                entry: s.exit,
                exit: s.entry,
                length: s.length,
            }),
        }
    }

    /// Samples at arc lengths 0, step, 2·step, … followed by the exact exit point.
    pub fn samples(&self, step: f64) -> Samples<'_> {
        let basis = match self {
            Channel::Arc(a) => a.basis(),
            Channel::Straight(_) => (Vector3::zeros(), Vector3::zeros()),
        };
        Samples {
            channel: self,
            basis,
            params: SampleParams::new(self.length(), step),
        }
    }

    /// The same centerline in tangent/curvature form.
    pub fn to_curve(&self) -> CurvatureCurve {
        match self {
            Channel::Arc(a) => {
                let (e1, e2) = a.basis();
                CurvatureCurve {
                    start: a.entry,
                    end: a.exit,
                    tangent: Unit::new_unchecked(e2),
                    inward: -e1,
                    curvature: 1.0 / a.radius,
                    length: a.length,
                }
            }
            Channel::Straight(s) => CurvatureCurve {
                start: s.entry,
                end: s.exit,
                tangent: Unit::new_normalize(s.exit - s.entry),
                inward: Vector3::zeros(),
                curvature: 0.0,
                length: s.length,
            },
        }
    }
}

/// Equal-interval sampling of `channel`, see [`Channel::samples`].
pub fn sample_channel(channel: &Channel, step: f64) -> Result<Vec<Point3<f64>>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling step must be positive, got {step}")));
    }
    Ok(channel.samples(step).collect())
}

/// Arc-length parameters for sampling a curve of `length` at `step`. Yields `None` for
/// the final sample, which callers must place exactly at the curve's end.
#[derive(Clone, Debug)]
pub struct SampleParams {
    step: f64,
    next: usize,
    regular: usize,
    done: bool,
}

impl SampleParams {
    pub fn new(length: f64, step: f64) -> Self {
        let q = length / step;
        let whole = (q + 1e-9).floor();
        // When the length is a multiple of the step, the last regular sample is the end itself.
        let regular = if (q - whole).abs() <= 1e-9 {
            whole as usize
        } else {
            whole as usize + 1
        };
        Self {
            step,
            next: 0,
            regular: regular.max(1),
            done: false,
        }
    }

    /// Total number of samples, including the end point.
    pub fn count(&self) -> usize {
        self.regular + 1
    }
}

impl Iterator for SampleParams {
    type Item = Option<f64>;

    fn next(&mut self) -> Option<Option<f64>> {
        if self.done {
            return None;
        }
        if self.next < self.regular {
            let s = self.next as f64 * self.step;
            self.next += 1;
            Some(Some(s))
        } else {
            self.done = true;
            Some(None)
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = if self.done { 0 } else { self.regular - self.next + 1 };
        (left, Some(left))
    }
}

impl ExactSizeIterator for SampleParams {}

pub struct Samples<'a> {
    channel: &'a Channel,
    basis: (Vector3<f64>, Vector3<f64>),
    params: SampleParams,
}

impl Iterator for Samples<'_> {
    type Item = Point3<f64>;

    #[inline]
    fn next(&mut self) -> Option<Point3<f64>> {
        let s = self.params.next()?;
        Some(match (s, self.channel) {
            (None, c) => c.exit(),
            (Some(0.0), c) => c.entry(),
            (Some(s), Channel::Arc(a)) => a.point_with_basis(self.basis, s),
            (Some(s), Channel::Straight(l)) => l.entry + (l.exit - l.entry) * (s / l.length),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.params.size_hint()
    }
}

impl ExactSizeIterator for Samples<'_> {}

/// Constant-curvature curve in Frenet form: start point, unit tangent, unit inward
/// normal and curvature κ. Zero curvature degenerates to a straight segment.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureCurve {
    pub start: Point3<f64>,
    pub end: Point3<f64>,
    pub tangent: Unit<Vector3<f64>>,
    pub inward: Vector3<f64>,
    pub curvature: f64,
    pub length: f64,
}

impl CurvatureCurve {
    pub fn point_at(&self, s: f64) -> Point3<f64> {
        if self.curvature == 0.0 {
            return self.start + self.tangent.into_inner() * s;
        }
        let k = self.curvature;
        let (sin, cos) = (k * s).sin_cos();
        self.start + self.tangent.into_inner() * (sin / k) + self.inward * ((1.0 - cos) / k)
    }

    pub fn samples(&self, step: f64) -> impl Iterator<Item = Point3<f64>> + '_ {
        SampleParams::new(self.length, step).map(move |s| match s {
            Some(s) => self.point_at(s),
            None => self.end,
        })
    }
}
