//! Periodic orbits of piecewise-linear maps by branch enumeration.
//!
//! On each branch of `f^p` the lift is affine, `F^p(x) = a x + b`, and the
//! periodic points are the solutions of `a x + b = x + K`.

use serde::{Deserialize, Serialize};

use crate::circle::{dist, CirclePoint, PlMap, Potential};
use crate::error::{Error, Result};

/// Default cap on the number of branches of `f^p` explored.
pub const DEFAULT_BRANCH_CAP: usize = 1 << 21;

/// Samples taken along a branch on which `f^p` is the identity.
const CONTINUUM_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub points: Vec<CirclePoint>,
    /// False when the orbit was sampled from a continuum of periodic points.
    pub isolated: bool,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn average(&self, phi: &Potential) -> f64 {
        self.points.iter().map(|&p| phi.eval(p)).sum::<f64>() / self.points.len() as f64
    }

    /// Orbit of `x` under `f` of minimal period at most `max_period`.
    pub fn trace(f: &PlMap, x: CirclePoint, max_period: usize, tol: f64) -> Option<PeriodicOrbit> {
        let mut points = vec![x];
        let mut y = f.eval(x);
        for _ in 0..max_period {
            if y.dist(x) <= tol {
                return Some(PeriodicOrbit { points, isolated: true });
            }
            points.push(y);
            y = f.eval(y);
        }
        None
    }

    fn canonical_start(&self) -> f64 {
        self.points.iter().map(|p| p.value()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy)]
struct Branch {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

/// All periodic orbits of period at most `max_period`, shortest first.
pub fn periodic_orbits(f: &PlMap, max_period: usize, branch_cap: usize) -> Result<Vec<PeriodicOrbit>> {
    if !f.has_finite_preimages() {
        let piece = (0..f.pieces()).find(|&i| f.slope(i) == 0.0).unwrap_or(0);
        return Err(Error::ZeroSlopePiece { piece });
    }
    let mut branches: Vec<Branch> = vec![Branch { lo: 0.0, hi: 1.0, a: 1.0, b: 0.0 }];
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for p in 1..=max_period {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for br in &branches {
            refine(f, br, &mut next);
            if next.len() > branch_cap {
                return Err(Error::BranchExplosion { cap: branch_cap, period: p });
            }
        }
        branches = next;
        for br in &branches {
            for x in fixed_points(br) {
                let tol = 1e-9;
                if let Some(orbit) = PeriodicOrbit::trace(f, CirclePoint::new(x), p, tol) {
                    push_unique(&mut orbits, orbit);
                }
            }
            if (br.a - 1.0).abs() < 1e-12 && (br.b - br.b.round()).abs() < 1e-12 {
                for k in 0..CONTINUUM_SAMPLES {
                    let x = br.lo + (br.hi - br.lo) * (k as f64 + 0.5) / CONTINUUM_SAMPLES as f64;
                    if let Some(mut orbit) = PeriodicOrbit::trace(f, CirclePoint::new(x), p, 1e-9) {
                        orbit.isolated = false;
                        push_unique(&mut orbits, orbit);
                    }
                }
            }
        }
    }
    orbits.sort_by(|a, b| a.period().cmp(&b.period()).then(a.canonical_start().total_cmp(&b.canonical_start())));
    Ok(orbits)
}

/// Splits a branch of `F^j` along the pieces of `F` met by its image.
fn refine(f: &PlMap, br: &Branch, out: &mut Vec<Branch>) {
    let t = f.breakpoints();
    let v = f.lift_values();
    let deg = f.degree() as f64;
    let (y0, y1) = (br.a * br.lo + br.b, br.a * br.hi + br.b);
    let (ylo, yhi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
    let m0 = ylo.floor() as i64 - 1;
    let m1 = yhi.floor() as i64 + 1;
    for m in m0..=m1 {
        for l in 0..f.pieces() {
            let (c, d) = (m as f64 + t[l], m as f64 + t[l + 1]);
            let (lo_y, hi_y) = (ylo.max(c), yhi.min(d));
            let degenerate = br.a == 0.0;
            if degenerate {
                if !(ylo >= c && ylo < d) {
                    continue;
                }
            } else if !(hi_y > lo_y) {
                continue;
            }
            let s = f.slope(l);
            let shift = v[l] - s * (m as f64 + t[l]) + m as f64 * deg;
            let (lo, hi) = if degenerate {
                (br.lo, br.hi)
            } else {
                let xa = (lo_y - br.b) / br.a;
                let xb = (hi_y - br.b) / br.a;
                (xa.min(xb).max(br.lo), xa.max(xb).min(br.hi))
            };
            if lo > hi {
                continue;
            }
            out.push(Branch { lo, hi, a: s * br.a, b: s * br.b + shift });
        }
    }
}

fn fixed_points(br: &Branch) -> Vec<f64> {
    let k = br.a - 1.0;
    if k.abs() < 1e-12 {
        return Vec::new();
    }
    // a x + b - x = K for integer K, with x in [lo, hi]
    let (g0, g1) = (k * br.lo + br.b, k * br.hi + br.b);
    let (glo, ghi) = if g0 <= g1 { (g0, g1) } else { (g1, g0) };
    let mut out = Vec::new();
    for kk in (glo - 1e-9).ceil() as i64..=(ghi + 1e-9).floor() as i64 {
        let x = (kk as f64 - br.b) / k;
        if x >= br.lo - 1e-12 && x <= br.hi + 1e-12 {
            out.push(x.max(br.lo).min(br.hi));
        }
    }
    out
}

fn push_unique(orbits: &mut Vec<PeriodicOrbit>, orbit: PeriodicOrbit) {
    let start = orbit.canonical_start();
    let dup = orbits.iter().any(|o| {
        o.period() == orbit.period() && o.points.iter().any(|p| dist(p.value(), start) < 1e-9)
    });
    if !dup {
        orbits.push(orbit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_fixed_point() {
        let orbits = periodic_orbits(&PlMap::doubling(), 1, DEFAULT_BRANCH_CAP).unwrap();
        assert_eq!(orbits.len(), 1);
        assert_eq!(orbits[0].points, vec![CirclePoint::new(0.0)]);
    }

    #[test]
    fn doubling_period_two() {
        let orbits = periodic_orbits(&PlMap::doubling(), 2, DEFAULT_BRANCH_CAP).unwrap();
        assert_eq!(orbits.len(), 2);
        let two = &orbits[1];
        assert_eq!(two.period(), 2);
        let mut pts: Vec<f64> = two.points.iter().map(|p| p.value()).collect();
        pts.sort_by(f64::total_cmp);
        assert!((pts[0] - 1.0 / 3.0).abs() < 1e-15 && (pts[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn orbit_counts_match_necklace_formula_for_doubling() {
        // number of orbits of minimal period p for 2x mod 1: 1, 1, 2, 3, 6, 9
        let orbits = periodic_orbits(&PlMap::doubling(), 6, DEFAULT_BRANCH_CAP).unwrap();
        let counts: Vec<usize> = (1..=6).map(|p| orbits.iter().filter(|o| o.period() == p).count()).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 6, 9]);
    }

    #[test]
    fn degree_three_matches_grid_scan() {
        let f = PlMap::from_slopes(vec![0.0, 0.2, 0.5, 1.0], 0.1, &[5.0, 2.0, 2.8], 3).unwrap();
        let orbits = periodic_orbits(&f, 3, DEFAULT_BRANCH_CAP).unwrap();
        let points: usize = orbits.iter().filter(|o| 3 % o.period() == 0).map(|o| o.period()).sum();
        // grid scan oracle: sign changes of F^3(x) - x modulo 1
        let n = 1_000_000;
        let g = |x: f64| {
            let mut y = x;
            for _ in 0..3 {
                y = f.lift(y);
            }
            y - x
        };
        let mut crossings = 0;
        let mut prev = g(0.0);
        for i in 1..=n {
            let cur = g(i as f64 / n as f64);
            crossings += (cur.floor() - prev.floor()).abs() as usize;
            prev = cur;
        }
        assert_eq!(points, crossings);
    }

    #[test]
    fn half_rotation_is_a_continuum() {
        let orbits = periodic_orbits(&PlMap::rotation(0.5), 2, DEFAULT_BRANCH_CAP).unwrap();
        assert!(!orbits.is_empty());
        assert!(orbits.iter().all(|o| o.period() == 2 && !o.isolated));
    }

    #[test]
    fn explosion_is_reported() {
        let r = periodic_orbits(&PlMap::linear(4), 12, 1000);
        assert!(matches!(r, Err(Error::BranchExplosion { .. })));
    }
}
