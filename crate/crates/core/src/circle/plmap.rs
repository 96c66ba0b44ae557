use serde::{Deserialize, Serialize};

use super::{dist, CirclePoint, LocalHomeo};
use crate::error::{Error, Result};

/// Tolerance used when matching computed abscissae against piece boundaries.
const KNOT_TOL: f64 = 1e-12;

/// A continuous piecewise-linear circle endomorphism given by its lift on
/// `[0, 1]`: `F(t_i) = v_i`, linear in between, `F(t + 1) = F(t) + degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlMap {
    breakpoints: Vec<f64>,
    lift_values: Vec<f64>,
    degree: i64,
}

impl PlMap {
    pub fn new(breakpoints: Vec<f64>, lift_values: Vec<f64>, degree: i64) -> Result<Self> {
        let map = PlMap { breakpoints, lift_values, degree };
        map.validate()?;
        Ok(map)
    }

    /// Checks the structural invariants; also used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let t = &self.breakpoints;
        let v = &self.lift_values;
        if t.len() < 2 || t.len() != v.len() {
            return Err(Error::InvalidMap(format!(
                "need matching breakpoints/liftValues of length >= 2, got {} and {}",
                t.len(),
                v.len()
            )));
        }
        if t[0] != 0.0 || t[t.len() - 1] != 1.0 {
            return Err(Error::InvalidMap("breakpoints must start at 0 and end at 1".into()));
        }
        if t.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidMap("breakpoints must be strictly increasing".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMap("lift values must be finite".into()));
        }
        let wrap = v[v.len() - 1] - v[0];
        if (wrap - self.degree as f64).abs() > 1e-9 {
            return Err(Error::InvalidMap(format!(
                "lift wraps by {wrap}, expected degree {}",
                self.degree
            )));
        }
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
        if hi - lo < 1.0 - 1e-12 {
            return Err(Error::InvalidMap(format!("image has length {} < 1: not surjective", hi - lo)));
        }
        Ok(())
    }

    /// Builds a map from its first lift value and per-piece slopes; the last
    /// value is pinned to `v0 + degree`.
    pub fn from_slopes(breakpoints: Vec<f64>, v0: f64, slopes: &[f64], degree: i64) -> Result<Self> {
        if slopes.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidMap("need one slope per piece".into()));
        }
        let mut values = Vec::with_capacity(breakpoints.len());
        values.push(v0);
        for (i, s) in slopes.iter().enumerate() {
            let prev = values[i];
            values.push(prev + s * (breakpoints[i + 1] - breakpoints[i]));
        }
        let last = values.len() - 1;
        values[last] = v0 + degree as f64;
        PlMap::new(breakpoints, values, degree)
    }

    /// `t -> degree * t`.
    pub fn linear(degree: i64) -> Self {
        PlMap { breakpoints: vec![0.0, 1.0], lift_values: vec![0.0, degree as f64], degree }
    }

    pub fn doubling() -> Self {
        PlMap::linear(2)
    }

    pub fn identity() -> Self {
        PlMap::linear(1)
    }

    pub fn rotation(angle: f64) -> Self {
        PlMap { breakpoints: vec![0.0, 1.0], lift_values: vec![angle, angle + 1.0], degree: 1 }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn lift_values(&self) -> &[f64] {
        &self.lift_values
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn slope(&self, piece: usize) -> f64 {
        let t = &self.breakpoints;
        let v = &self.lift_values;
        (v[piece + 1] - v[piece]) / (t[piece + 1] - t[piece])
    }

    pub fn slopes(&self) -> Vec<f64> {
        (0..self.pieces()).map(|i| self.slope(i)).collect()
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.slopes().into_iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// True when no piece is constant, so every point has at most
    /// `pieces()` preimages.
    pub fn has_finite_preimages(&self) -> bool {
        (0..self.pieces()).all(|i| self.lift_values[i + 1] != self.lift_values[i])
    }

    /// Index of the piece containing `frac` in `[0, 1)`.
    fn piece_of(&self, frac: f64) -> usize {
        let idx = self.breakpoints.partition_point(|&b| b <= frac);
        idx.saturating_sub(1).min(self.pieces() - 1)
    }

    /// Lift `F` evaluated at any real `x`.
    pub fn lift(&self, x: f64) -> f64 {
        let n = x.floor();
        let frac = x - n;
        let shift = n * self.degree as f64;
        let i = self.piece_of(frac);
        let t = &self.breakpoints;
        let v = &self.lift_values;
        if frac == t[i] {
            return v[i] + shift;
        }
        let w = (frac - t[i]) / (t[i + 1] - t[i]);
        v[i] + w * (v[i + 1] - v[i]) + shift
    }

    pub fn eval(&self, x: CirclePoint) -> CirclePoint {
        CirclePoint::new(self.lift(x.value()))
    }

    /// `f^n(x)`.
    pub fn iterate(&self, x: CirclePoint, n: usize) -> CirclePoint {
        (0..n).fold(x, |p, _| self.eval(p))
    }

    /// All solutions of `f(x) = y`, one linear solve per piece.
    pub fn preimages(&self, y: CirclePoint) -> Result<Vec<CirclePoint>> {
        if let Some(piece) = (0..self.pieces()).find(|&i| self.lift_values[i + 1] == self.lift_values[i]) {
            return Err(Error::ZeroSlopePiece { piece });
        }
        Ok(self.preimages_skipping_flat(y))
    }

    /// Preimages through non-constant pieces only.
    pub(crate) fn preimages_skipping_flat(&self, y: CirclePoint) -> Vec<CirclePoint> {
        let t = &self.breakpoints;
        let v = &self.lift_values;
        let mut out: Vec<f64> = Vec::new();
        for i in 0..self.pieces() {
            let (a, b) = (v[i], v[i + 1]);
            if a == b {
                continue;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let first = (lo - y.value()).ceil() as i64;
            let last = (hi - y.value()).floor() as i64;
            // range extended by one to absorb rounding at piece ends
            for m in (first - 1)..=(last + 1) {
                let target = y.value() + m as f64;
                let w = (target - a) / (b - a);
                let x = t[i] + w * (t[i + 1] - t[i]);
                if x < t[i] - KNOT_TOL || x > t[i + 1] + KNOT_TOL {
                    continue;
                }
                out.push(x.clamp(t[i], t[i + 1]).rem_euclid(1.0));
            }
        }
        dedupe_circular(out)
    }

    /// Exact C0 distance `sup_x d(f(x), g(x))`.
    ///
    /// The lift difference is piecewise linear on the merged breakpoints, so
    /// the sup is attained at a merged breakpoint or is 1/2 when the
    /// difference crosses a half-integer.
    pub fn c0_distance(&self, other: &PlMap) -> f64 {
        let knots = merge_sorted(&self.breakpoints, &other.breakpoints);
        let diff = |x: f64| self.lift(x) - other.lift(x);
        let near = |d: f64| (d - d.round()).abs();
        let mut best: f64 = 0.0;
        let mut prev = diff(knots[0]);
        best = best.max(near(prev));
        for &x in &knots[1..] {
            // evaluate the right end of the segment from the left
            let cur = if x == 1.0 { diff(0.0) + (self.degree - other.degree) as f64 } else { diff(x) };
            best = best.max(near(cur));
            if (prev - 0.5).floor() != (cur - 0.5).floor() {
                return 0.5;
            }
            prev = cur;
        }
        best
    }

    /// `T ∘ f` as a piecewise-linear map. New breakpoints are the
    /// f-preimages of the knots of `T`.
    pub fn compose_local(&self, homeo: &LocalHomeo) -> PlMap {
        if homeo.is_identity() {
            return self.clone();
        }
        let mut xs: Vec<f64> = self.breakpoints[..self.pieces()].to_vec();
        for u in homeo.knot_positions() {
            for x in self.preimages_skipping_flat(CirclePoint::new(u)) {
                xs.push(x.value());
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        if xs[0] != 0.0 {
            xs.insert(0, 0.0);
        }
        let mut values: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let fx = self.lift(x);
                fx + homeo.displacement(CirclePoint::new(fx))
            })
            .collect();
        xs.push(1.0);
        values.push(values[0] + self.degree as f64);
        PlMap { breakpoints: xs, lift_values: values, degree: self.degree }
    }

    /// Inserts (or overwrites) a breakpoint at `x` whose lift value is moved to
    /// the representative of `target` nearest to the current value. Used to
    /// make a computed periodic orbit close exactly in floating point.
    pub fn with_snapped_value(&self, x: CirclePoint, target: CirclePoint) -> PlMap {
        let xv = x.value();
        let current = self.lift(xv);
        let snapped = current + super::signed_offset(current, target.value());
        let mut t = self.breakpoints.clone();
        let mut v = self.lift_values.clone();
        let idx = t.partition_point(|&b| b < xv);
        if idx < t.len() && t[idx] == xv {
            v[idx] = snapped;
            if idx == 0 {
                let last = v.len() - 1;
                v[last] = snapped + self.degree as f64;
            }
        } else {
            t.insert(idx, xv);
            v.insert(idx, snapped);
        }
        PlMap { breakpoints: t, lift_values: v, degree: self.degree }
    }

    /// Removes breakpoints between collinear pieces.
    pub fn simplified(&self, tol: f64) -> PlMap {
        let mut t = vec![self.breakpoints[0]];
        let mut v = vec![self.lift_values[0]];
        for i in 1..self.pieces() {
            let s_prev = (self.lift_values[i] - v[v.len() - 1]) / (self.breakpoints[i] - t[t.len() - 1]);
            let s_next = self.slope(i);
            if (s_prev - s_next).abs() > tol {
                t.push(self.breakpoints[i]);
                v.push(self.lift_values[i]);
            }
        }
        t.push(1.0);
        v.push(self.lift_values[self.pieces()]);
        PlMap { breakpoints: t, lift_values: v, degree: self.degree }
    }

    /// Range `[min, max]` of the lift over the real interval `[a, b]`.
    pub fn lift_range(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = self.lift(a).min(self.lift(b));
        let mut hi = self.lift(a).max(self.lift(b));
        let n0 = a.floor() as i64;
        let n1 = b.floor() as i64;
        for n in n0..=n1 {
            for &t in &self.breakpoints {
                let x = n as f64 + t;
                if x > a && x < b {
                    let y = self.lift(x);
                    lo = lo.min(y);
                    hi = hi.max(y);
                }
            }
        }
        (lo, hi)
    }
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Sorts circle representatives and merges those closer than `KNOT_TOL`,
/// including across `0 ≡ 1`.
fn dedupe_circular(mut xs: Vec<f64>) -> Vec<CirclePoint> {
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(xs.len());
    for x in xs {
        if out.last().map_or(true, |&p| dist(p, x) > KNOT_TOL) {
            out.push(x);
        }
    }
    if out.len() > 1 && dist(out[0], out[out.len() - 1]) <= KNOT_TOL {
        out.pop();
    }
    out.into_iter().map(CirclePoint::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::Arc;

    fn p(x: f64) -> CirclePoint {
        CirclePoint::new(x)
    }

    #[test]
    fn eval_linear_maps() {
        assert!((PlMap::doubling().eval(p(0.3)).value() - 0.6).abs() < 1e-15);
        assert_eq!(PlMap::identity().eval(p(0.77)).value(), 0.77);
    }

    #[test]
    fn eval_degree_three_piecewise() {
        let f = PlMap::from_slopes(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 0.0, &[3.0, 3.0, 3.0], 3).unwrap();
        // direct interpolation: piece [1/3, 2/3] goes 1 -> 2, at 0.5 the lift is 1.5
        assert!((f.lift(0.5) - 1.5).abs() < 1e-12);
        assert!((f.eval(p(0.5)).value() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eval_is_exact_on_breakpoints() {
        let f = PlMap::new(vec![0.0, 0.25, 1.0], vec![0.1, 1.1, 2.1], 2).unwrap();
        assert_eq!(f.lift(0.25), 1.1);
        assert_eq!(f.lift(1.25), 3.1);
    }

    #[test]
    fn preimages_of_doubling() {
        let pre = PlMap::doubling().preimages(p(0.5)).unwrap();
        assert_eq!(pre.len(), 2);
        assert!((pre[0].value() - 0.25).abs() < 1e-15);
        assert!((pre[1].value() - 0.75).abs() < 1e-15);
        let id = PlMap::identity().preimages(p(0.1)).unwrap();
        assert_eq!(id, vec![p(0.1)]);
    }

    #[test]
    fn preimages_of_uneven_degree_two() {
        let f = PlMap::from_slopes(vec![0.0, 0.25, 1.0], 0.0, &[4.0, 4.0 / 3.0], 2).unwrap();
        let pre = f.preimages(p(0.5)).unwrap();
        assert_eq!(pre.len(), 2);
        // dense scan oracle at 1e-6
        let n = 1_000_000;
        let mut hits = Vec::new();
        for i in 0..n {
            let x = i as f64 / n as f64;
            let a = f.lift(x) - 0.5;
            let b = f.lift((i + 1) as f64 / n as f64) - 0.5;
            if a.floor() != b.floor() || a == a.floor() {
                hits.push(x);
            }
        }
        for h in hits {
            assert!(pre.iter().any(|q| dist(q.value(), h) <= 2e-6), "missed preimage near {h}");
        }
        for q in pre {
            assert!(f.eval(q).dist(p(0.5)) < 1e-12);
        }
    }

    #[test]
    fn preimages_reject_flat_piece() {
        let f = PlMap::new(vec![0.0, 0.2, 0.4, 1.0], vec![0.0, 0.5, 0.5, 2.0], 2).unwrap();
        assert_eq!(f.preimages(p(0.1)), Err(Error::ZeroSlopePiece { piece: 1 }));
    }

    #[test]
    fn c0_distance_cases() {
        let f = PlMap::doubling();
        assert_eq!(f.c0_distance(&f), 0.0);
        let d = PlMap::identity().c0_distance(&PlMap::rotation(0.1));
        assert!((d - 0.1).abs() < 1e-15);
        assert!((PlMap::identity().c0_distance(&PlMap::rotation(0.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn c0_distance_against_local_move() {
        let f = PlMap::doubling();
        let support = Arc::closed(0.6, 0.1).unwrap();
        let t = LocalHomeo::moving(support, p(0.6), p(0.63)).unwrap();
        let g = f.compose_local(&t);
        let d = f.c0_distance(&g);
        // dense grid oracle
        let mut grid_max: f64 = 0.0;
        for i in 0..=100_000 {
            let x = p(i as f64 / 100_000.0);
            grid_max = grid_max.max(f.eval(x).dist(g.eval(x)));
        }
        assert!((d - 0.03).abs() < 1e-12, "{d}");
        assert!(grid_max <= d + 1e-12 && d - grid_max < 1e-4);
    }

    #[test]
    fn compose_with_identity_homeo() {
        let f = PlMap::doubling();
        let id = LocalHomeo::identity(Arc::closed(0.5, 0.1).unwrap());
        assert_eq!(f.compose_local(&id), f);
        let t = LocalHomeo::moving(Arc::closed(0.5, 0.2).unwrap(), p(0.5), p(0.4)).unwrap();
        let g = PlMap::identity().compose_local(&t);
        assert!((g.eval(p(0.5)).value() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn compose_matches_pointwise() {
        let f = PlMap::doubling();
        let t = LocalHomeo::moving(Arc::closed(0.6, 0.05).unwrap(), p(0.61), p(0.58)).unwrap();
        let g = f.compose_local(&t);
        for i in 0..10_000 {
            let x = p(i as f64 / 10_000.0);
            let direct = t.apply(f.eval(x));
            assert!(g.eval(x).dist(direct) < 1e-12);
        }
    }

    #[test]
    fn snapping_closes_orbit() {
        let f = PlMap::doubling();
        let g = f.with_snapped_value(p(0.3), p(0.62));
        assert_eq!(g.eval(p(0.3)).value(), 0.62);
        assert!(g.c0_distance(&f) < 0.021);
    }

    #[test]
    fn simplify_merges_collinear() {
        let f = PlMap::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(f.simplified(1e-12), PlMap::doubling());
    }
}
