use serde::{Deserialize, Serialize};

use super::{Arc, CirclePoint};
use crate::error::{Error, Result};

/// A circle homeomorphism that is the identity outside a closed arc and an
/// increasing piecewise-linear bijection of that arc fixing its endpoints.
///
/// Knots are `(from, to)` pairs in the lift chart of the support, the first
/// and last being the fixed endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalHomeo {
    pub support: Arc,
    pub knots: Vec<(f64, f64)>,
}

impl LocalHomeo {
    pub fn new(support: Arc, knots: Vec<(f64, f64)>) -> Result<Self> {
        let h = LocalHomeo { support, knots };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support.lift_bounds();
        let k = &self.knots;
        if k.len() < 2 {
            return Err(Error::InvalidHomeo("need at least the two endpoint knots".into()));
        }
        let tol = 1e-12;
        let (first, last) = (k[0], k[k.len() - 1]);
        if (first.0 - lo).abs() > tol || (first.1 - lo).abs() > tol || (last.0 - hi).abs() > tol || (last.1 - hi).abs() > tol {
            return Err(Error::InvalidHomeo("endpoints of the support must be fixed".into()));
        }
        for w in k.windows(2) {
            if !(w[0].0 < w[1].0) || !(w[0].1 < w[1].1) {
                return Err(Error::InvalidHomeo(format!(
                    "knots not strictly increasing: {:?} -> {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    pub fn identity(support: Arc) -> Self {
        let (lo, hi) = support.lift_bounds();
        LocalHomeo { support, knots: vec![(lo, lo), (hi, hi)] }
    }

    /// The three-knot homeomorphism of `support` sending `from` to `to`.
    pub fn moving(support: Arc, from: CirclePoint, to: CirclePoint) -> Result<Self> {
        if !support.contains(from) || !support.contains(to) {
            return Err(Error::DegenerateGeometry("moved points must lie in the support".into()));
        }
        let (lo, hi) = support.lift_bounds();
        let (a, b) = (support.chart(from), support.chart(to));
        if a == b {
            return Ok(LocalHomeo::identity(support));
        }
        if !(a > lo && a < hi && b > lo && b < hi) {
            return Err(Error::DegenerateGeometry(format!(
                "moved points {} -> {} touch the support boundary",
                from.value(),
                to.value()
            )));
        }
        LocalHomeo::new(support, vec![(lo, lo), (a, b), (hi, hi)])
    }

    pub fn is_identity(&self) -> bool {
        self.knots.iter().all(|(a, b)| a == b)
    }

    /// Knot abscissae, endpoints included.
    pub fn knot_positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k.0)
    }

    /// Lift-coordinate displacement `T(y) - y`.
    pub fn displacement(&self, y: CirclePoint) -> f64 {
        let (_, hi) = self.support.lift_bounds();
        let u = self.support.chart(y);
        if u > hi {
            return 0.0;
        }
        let k = &self.knots;
        let i = k.partition_point(|kn| kn.0 <= u).clamp(1, k.len() - 1);
        let (a, b) = (k[i - 1], k[i]);
        if u == a.0 {
            return a.1 - a.0;
        }
        let w = (u - a.0) / (b.0 - a.0);
        a.1 + w * (b.1 - a.1) - u
    }

    pub fn apply(&self, y: CirclePoint) -> CirclePoint {
        CirclePoint::new(y.value() + self.displacement(y))
    }

    /// Largest displacement, attained at a knot.
    pub fn max_displacement(&self) -> f64 {
        self.knots.iter().fold(0.0, |m, (a, b)| m.max((b - a).abs()))
    }

    /// Slopes of the pieces of the support bijection.
    pub fn slopes(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> CirclePoint {
        CirclePoint::new(x)
    }

    #[test]
    fn identity_outside_support() {
        let t = LocalHomeo::moving(Arc::closed(0.5, 0.2).unwrap(), p(0.5), p(0.45)).unwrap();
        assert_eq!(t.apply(p(0.1)), p(0.1));
        assert_eq!(t.apply(p(0.9)), p(0.9));
        assert!((t.apply(p(0.5)).value() - 0.45).abs() < 1e-15);
        // continuity at the support boundary
        assert!(t.displacement(p(0.3 + 1e-9)).abs() < 1e-8);
        assert!(t.displacement(p(0.7 - 1e-9)).abs() < 1e-8);
    }

    #[test]
    fn wraps_across_zero() {
        let t = LocalHomeo::moving(Arc::closed(0.0, 0.1).unwrap(), p(0.97), p(0.02)).unwrap();
        assert!((t.apply(p(0.97)).value() - 0.02).abs() < 1e-12);
        assert_eq!(t.apply(p(0.5)), p(0.5));
    }

    #[test]
    fn rejects_boundary_moves_and_non_monotone_knots() {
        let arc = Arc::closed(0.5, 0.1).unwrap();
        assert!(LocalHomeo::moving(arc, p(0.6), p(0.55)).is_err());
        assert!(LocalHomeo::new(arc, vec![(0.4, 0.4), (0.5, 0.45), (0.55, 0.44), (0.6, 0.6)]).is_err());
    }

    #[test]
    fn displacement_bounded_by_knots() {
        let t = LocalHomeo::moving(Arc::closed(0.3, 0.05).unwrap(), p(0.32), p(0.29)).unwrap();
        assert!((t.max_displacement() - 0.03).abs() < 1e-15);
        for i in 0..1000 {
            assert!(t.displacement(p(i as f64 / 1000.0)).abs() <= 0.03 + 1e-15);
        }
    }
}
