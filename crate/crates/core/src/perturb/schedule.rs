use serde::{Deserialize, Serialize};

use super::geometry::SourceSetup;
use crate::circle::{Arc, CirclePoint, LocalHomeo, PlMap};
use crate::error::{Error, Result};

/// The radial speed data of `T₂`.
///
/// `T₂` moves a point at distance `d` from `α` to distance `ρ(d)`, where `ρ`
/// is linear between the knots `(0, 0)`, `(r_k, s_{k-1})` for `k = K..1` and
/// `(R₂, R₂)`; `λ = ρ(d)/d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlphaSchedule {
    pub alpha: CirclePoint,
    pub n_q: usize,
    pub r1: f64,
    pub r2: f64,
    /// Strictly decreasing, `s[0] = R₁`.
    pub s: Vec<f64>,
    /// `P(s[i]) <= 2^{-levels[i]} P(R₁)`.
    pub levels: Vec<u32>,
    /// `r[i] = min(Q(s[i]), s[i])`.
    pub r: Vec<f64>,
    pub p_r1: f64,
    /// Sample spacing of `ψ`; the schedule stops below it.
    pub resolution: f64,
}

impl AlphaSchedule {
    /// Knots `(d, ρ(d))` of the radius map, increasing, origin excluded.
    pub fn radius_knots(&self) -> Vec<(f64, f64)> {
        let k = self.s.len() - 1;
        let mut knots: Vec<(f64, f64)> = (1..=k).rev().map(|i| (self.r[i], self.s[i - 1])).collect();
        knots.push((self.r2, self.r2));
        knots
    }

    pub fn radius_map(&self, d: f64) -> f64 {
        if d >= self.r2 {
            return d;
        }
        let mut prev = (0.0, 0.0);
        for (a, b) in self.radius_knots() {
            if d <= a {
                return prev.1 + (b - prev.1) * (d - prev.0) / (a - prev.0);
            }
            prev = (a, b);
        }
        d
    }

    pub fn lambda(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return self.radius_knots()[0].1 / self.radius_knots()[0].0;
        }
        self.radius_map(d) / d
    }
}

/// Builds `s_i`, `r_i` and the radii `R₁ < R₂` around `α`.
///
/// `f_tilde` is `T₁∘f`; its return map on `W_α` is `f̃^{n_q}`, monotone with
/// `α` fixed, so `Q(s)` is attained at distance exactly `s`.
pub fn lambda_schedule(f: &PlMap, f_tilde: &PlMap, setup: &SourceSetup, eta: f64) -> Result<AlphaSchedule> {
    let g = &setup.geometry;
    let psi = &setup.psi;
    let h = psi.step();
    let alpha = g.alpha;
    let ia = setup.psi.values.len();
    let idx = ((psi.q.offset_to(alpha) * psi.orientation) / h).round() as usize;
    let reach = alpha.dist(CirclePoint::new(g.w_alpha.lift_bounds().0)).max(alpha.dist(CirclePoint::new(g.w_alpha.lift_bounds().1)));
    let r1 = 1.05 * reach + h;
    let far = alpha.dist(g.q0);
    let mut r2 = 2.0 * r1;
    if r2 >= 0.9 * far {
        r2 = 0.5 * (r1 + 0.9 * far);
    }
    if !(r2 > r1) || r2 >= 0.5 {
        return Err(Error::DegenerateGeometry(format!("no room for R2 > R1 = {r1} inside E")));
    }

    // cumulative maximum of ψ over samples at distance m·h from α
    let span = idx.max(ia - 1 - idx);
    let mut cummax = Vec::with_capacity(span + 1);
    let mut run = f64::NEG_INFINITY;
    for m in 0..=span {
        for k in [idx.checked_sub(m), Some(idx + m)].into_iter().flatten() {
            if k < ia {
                run = run.max(psi.values[k]);
            }
        }
        cummax.push(run);
    }
    let psi_alpha = psi.values[idx];
    let p_up = |s: f64| -> f64 {
        let m = (((s + h / 2.0) / h).ceil() as usize).saturating_sub(1).min(span);
        cummax[m] + psi.bar - psi_alpha
    };
    let p_r1 = p_up(r1);
    if p_r1 <= eta {
        return Err(Error::FlatP(p_r1));
    }

    let mut s = vec![r1];
    let mut levels = vec![0u32];
    for i in 1..=200u32 {
        let target = p_r1 / 2f64.powi(i as i32);
        let si = match cummax.iter().position(|&c| c + psi.bar - psi_alpha > target) {
            Some(m) => (m as f64 * h - h / 2.0).min(r1),
            None => r1,
        };
        if si < h {
            break;
        }
        if si < s[s.len() - 1] {
            s.push(si);
            levels.push(i);
        }
    }

    let q_of = |sv: f64| -> f64 {
        let mut best = f64::INFINITY;
        for side in [1.0, -1.0] {
            let z = CirclePoint::new(alpha.value() + side * sv);
            if g.in_w_alpha(f, z) {
                best = best.min(f_tilde.iterate(z, g.n_q).dist(alpha));
            }
        }
        best
    };
    let r: Vec<f64> = s.iter().map(|&sv| q_of(sv).min(sv)).collect();
    for w in r.windows(2) {
        if !(w[1] < w[0]) || !(w[1] > 0.0) {
            return Err(Error::MonotonicityBreak("r_i is not strictly decreasing".into()));
        }
    }
    Ok(AlphaSchedule { alpha, n_q: g.n_q, r1, r2, s, levels, r, p_r1, resolution: h })
}

/// `T₂(z) = α + ρ(d(z, α))·sign(z − α)`: a symmetric increasing PL bijection
/// of `B_{R₂}[α]` fixing `α` and the endpoints.
pub fn build_t2(schedule: &AlphaSchedule) -> Result<LocalHomeo> {
    if schedule.s.len() < 2 {
        return Err(Error::FlatP(schedule.p_r1));
    }
    let knots = schedule.radius_knots();
    let mut prev = (0.0, 0.0);
    for &(a, b) in &knots {
        if !(a > prev.0 && b > prev.1) {
            return Err(Error::MonotonicityBreak(format!("knot ({a}, {b}) after {prev:?}")));
        }
        if a < schedule.r2 && !(b > a) {
            return Err(Error::MonotonicityBreak(format!("knot ({a}, {b}) does not expand")));
        }
        prev = (a, b);
    }
    let support = Arc::closed(schedule.alpha, schedule.r2)?;
    let c = support.chart(schedule.alpha);
    let mut k: Vec<(f64, f64)> = knots.iter().rev().map(|&(a, b)| (c - a, c - b)).collect();
    k.push((c, c));
    k.extend(knots.iter().map(|&(a, b)| (c + a, c + b)));
    LocalHomeo::new(support, k).map_err(|e| Error::MonotonicityBreak(e.to_string()))
}
