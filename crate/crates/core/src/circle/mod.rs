//! The circle `R/Z`: points, metric balls, potentials and piecewise-linear
//! endomorphisms.

mod approx;
mod homeo;
mod plmap;
mod potential;

pub use approx::{pl_approximate, MapSamples, MIN_ABS_SLOPE};
pub use homeo::LocalHomeo;
pub use plmap::PlMap;
pub use potential::Potential;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R/Z`, stored as its representative in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CirclePoint(f64);

impl CirclePoint {
    /// Reduces any real number mod 1.
    pub fn new(x: f64) -> Self {
        let mut r = x.rem_euclid(1.0);
        // rem_euclid can round up to exactly 1.0 for tiny negative inputs
        if r >= 1.0 {
            r = 0.0;
        }
        CirclePoint(r)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Circle distance `min(|a-b|, 1-|a-b|)`.
    pub fn dist(self, other: CirclePoint) -> f64 {
        dist(self.0, other.0)
    }

    /// Signed displacement from `self` to `other`, in `[-1/2, 1/2)`.
    pub fn offset_to(self, other: CirclePoint) -> f64 {
        signed_offset(self.0, other.0)
    }
}

impl From<f64> for CirclePoint {
    fn from(x: f64) -> Self {
        CirclePoint::new(x)
    }
}

/// Circle distance between two real representatives.
pub fn dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Representative of `to - from` mod 1 in `[-1/2, 1/2)`.
pub fn signed_offset(from: f64, to: f64) -> f64 {
    let d = (to - from + 0.5).rem_euclid(1.0) - 0.5;
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// A metric ball on the circle: the arc `[center - radius, center + radius]`
/// (closed) or its interior (open).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: CirclePoint,
    pub radius: f64,
    pub closed: bool,
}

impl Arc {
    pub fn new(center: impl Into<CirclePoint>, radius: f64, closed: bool) -> Result<Self> {
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::InvalidArc(format!("radius {radius} outside (0, 1/2)")));
        }
        Ok(Arc { center: center.into(), radius, closed })
    }

    pub fn closed(center: impl Into<CirclePoint>, radius: f64) -> Result<Self> {
        Arc::new(center, radius, true)
    }

    pub fn open(center: impl Into<CirclePoint>, radius: f64) -> Result<Self> {
        Arc::new(center, radius, false)
    }

    /// Closed arc swept from `a` to `b` along the shorter direction.
    pub fn spanning(a: CirclePoint, b: CirclePoint) -> Result<Self> {
        let off = a.offset_to(b);
        Arc::closed(a.value() + off / 2.0, off.abs() / 2.0)
    }

    /// Closed arc given by lift endpoints `lo < hi`.
    pub fn from_lift(lo: f64, hi: f64) -> Result<Self> {
        Arc::closed((lo + hi) / 2.0, (hi - lo) / 2.0)
    }

    pub fn contains(&self, z: CirclePoint) -> bool {
        let d = self.center.dist(z);
        if self.closed {
            d <= self.radius
        } else {
            d < self.radius
        }
    }

    /// Lift coordinates `(lo, hi)` of the endpoints, with `lo` possibly negative.
    pub fn lift_bounds(&self) -> (f64, f64) {
        let c = self.center.value();
        (c - self.radius, c + self.radius)
    }

    /// Lift coordinate of `z` in the chart `[lo, lo + 1)` of this arc.
    pub fn chart(&self, z: CirclePoint) -> f64 {
        let (lo, _) = self.lift_bounds();
        lo + (z.value() - lo).rem_euclid(1.0)
    }

    /// Distance from `z` (assumed inside) to the nearest endpoint.
    pub fn depth(&self, z: CirclePoint) -> f64 {
        self.radius - self.center.dist(z)
    }

    pub fn contains_arc(&self, other: &Arc) -> bool {
        self.center.dist(other.center) + other.radius <= self.radius
    }

    pub fn length(&self) -> f64 {
        2.0 * self.radius
    }

    /// Grid points `i / grid` that lie in the arc, in increasing chart order.
    pub fn grid_points(&self, grid: usize) -> Vec<CirclePoint> {
        let (lo, hi) = self.lift_bounds();
        let g = grid as f64;
        let first = (lo * g).ceil() as i64;
        let last = (hi * g).floor() as i64;
        (first..=last)
            .map(|i| CirclePoint::new(i as f64 / g))
            .filter(|z| self.contains(*z))
            .collect()
    }

    /// `count` evenly spaced points covering the closed arc, endpoints included.
    pub fn samples(&self, count: usize) -> Vec<CirclePoint> {
        let (lo, hi) = self.lift_bounds();
        let n = count.max(2);
        (0..n)
            .map(|i| CirclePoint::new(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    }
}
