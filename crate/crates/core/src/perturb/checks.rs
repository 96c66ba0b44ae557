use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{orbit_residual, PerturbationPlan};
use crate::birkhoff::ReturnStructure;
use crate::circle::{CirclePoint, PlMap, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub checked: u64,
    pub violations: u64,
    /// Largest amount by which a violated inequality failed.
    pub worst: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn record(&mut self, excess: f64) {
        self.checked += 1;
        if !(excess <= 0.0) {
            self.violations += 1;
            if excess.is_finite() {
                self.worst = self.worst.max(excess);
            } else {
                self.worst = f64::MAX;
            }
        }
    }

    fn merge(mut self, other: CheckOutcome) -> CheckOutcome {
        self.checked += other.checked;
        self.violations += other.violations;
        self.worst = self.worst.max(other.worst);
        self
    }
}

/// Named check suites, ordered by name so serialization is stable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LemmaChecks(pub BTreeMap<String, CheckOutcome>);

impl LemmaChecks {
    pub fn all_passed(&self) -> bool {
        self.0.values().all(CheckOutcome::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.0.get(name)
    }

    pub(crate) fn put(&mut self, name: &str, outcome: CheckOutcome) {
        self.0.insert(name.to_string(), outcome);
    }
}

const REL: f64 = 1e-9;

/// Runs the structural checks on any plan and, for a source plan, the
/// shrink-step, shrink-run, block-average, escape, off-W₀ and expansion suites
/// over `samples` points. Support containment is scanned on `grid` points.
/// `phi` is the normalized potential.
pub fn lemma_checks(
    f: &PlMap,
    f_hat: &PlMap,
    plan: &PerturbationPlan,
    phi: &Potential,
    grid: usize,
    samples: usize,
    eta: f64,
) -> LemmaChecks {
    let mut out = LemmaChecks::default();

    let mut valid = CheckOutcome::default();
    for t in &plan.steps {
        valid.record(if t.validate().is_ok() { 0.0 } else { 1.0 });
    }
    out.put("homeoValid", valid);

    let mut periodic = CheckOutcome::default();
    periodic.record(orbit_residual(f_hat, plan.periodic_point, plan.period) - 1e-12);
    out.put("periodicity", periodic);

    let containment = (0..grid)
        .into_par_iter()
        .map(|i| {
            let z = CirclePoint::new(i as f64 / grid as f64);
            let fz = f.eval(z);
            let mut c = CheckOutcome::default();
            if !plan.support_arcs.iter().any(|a| a.contains(fz)) {
                c.record(f_hat.eval(z).dist(fz) - 1e-12);
            }
            c
        })
        .reduce(CheckOutcome::default, CheckOutcome::merge);
    out.put("supportContainment", containment);

    let (Some(g), Some(sch)) = (&plan.geometry, &plan.schedule) else {
        return out;
    };
    let Some(t2) = plan.steps.last() else {
        return out;
    };
    let alpha = g.alpha;
    let n_q = g.n_q;

    let mut expansion = CheckOutcome::default();
    for i in 0..samples {
        let d = sch.r1 * (i as f64 + 0.5) / samples as f64;
        for side in [1.0, -1.0] {
            let z = CirclePoint::new(alpha.value() + side * d);
            let moved = t2.apply(z).dist(alpha);
            expansion.record(if moved > d { 0.0 } else { d - moved + f64::MIN_POSITIVE });
        }
    }
    // T₂ is linear in the radius between knots, so pushing every interior
    // knot strictly outward and keeping its side gives λ > 1 on every piece
    let a = t2.support.chart(alpha);
    let interior = &t2.knots[1..t2.knots.len().saturating_sub(1).max(1)];
    for &(x, y) in interior {
        let d = (x - a).abs();
        if d == 0.0 {
            continue;
        }
        let outward = (y - a) * (x - a).signum();
        expansion.record(if outward > d { 0.0 } else { d - outward + f64::MIN_POSITIVE });
    }
    out.put("expansion", expansion);

    let mut escape = CheckOutcome::default();
    escape.record(n_q as f64 * (g.psi_max_upper - g.psi_alpha) - (g.psi_alpha - g.psi_q));
    out.put("escapeBound", escape);

    // half the points uniform over W_α, half log-spaced in d(z, α) down to
    // below the last radius, where the shrinking suites have something to test
    let (lo, hi) = g.w_alpha.lift_bounds();
    let a = g.w_alpha.chart(alpha);
    let d_max = (a - lo).max(hi - a);
    let d_min = (sch.r.last().copied().unwrap_or(d_max) / 16.0).min(d_max);
    let inside = |zs: Vec<f64>, want: usize| thin(zs.into_iter().map(CirclePoint::new).filter(|&z| g.in_w_alpha(f, z)).collect(), want);
    let uniform = samples / 2;
    let logged = samples - uniform;
    let over = 4;
    let mut zs = inside(
        (0..over * uniform).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / (over * uniform) as f64).collect(),
        uniform,
    );
    let half = (over * logged).div_ceil(2).max(1);
    zs.extend(inside(
        (0..2 * half)
            .map(|i| {
                let t = (i / 2) as f64 / half as f64;
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                a + side * d_min * (d_max / d_min).powf(t)
            })
            .collect(),
        logged,
    ));
    let levels = sch.s.len() - 1;
    let f_hat2 = |z: CirclePoint| f_hat.iterate(z, n_q);
    let results: Vec<(CheckOutcome, CheckOutcome, CheckOutcome)> = zs
        .par_iter()
        .map(|&z| {
            let (mut shrink_step, mut shrink_run, mut block_avg) = (CheckOutcome::default(), CheckOutcome::default(), CheckOutcome::default());
            let dz = z.dist(alpha);
            let y = f_hat2(z);
            let dy = y.dist(alpha);
            for k in 0..levels {
                if dy < sch.s[k] {
                    shrink_step.record(dz - sch.s[k + 1] * (1.0 + REL));
                }
            }
            // longest run z, f̂₂ z, …, f̂₂^N z inside W_α
            let mut run = 0;
            let mut w = z;
            while run < levels {
                let next = f_hat2(w);
                if !g.in_w_alpha(f, next) {
                    break;
                }
                w = next;
                run += 1;
            }
            shrink_run.record(dz - sch.s[run] * (1.0 + REL));
            let mut x = z;
            let mut sum = 0.0;
            for k in 1..=run {
                for _ in 0..n_q {
                    sum += phi.eval(x);
                    x = f_hat.eval(x);
                }
                let avg = sum / (k * n_q) as f64;
                let bound = g.psi_alpha + (g.psi_max_upper - g.psi_alpha) / k as f64;
                block_avg.record(avg - bound - REL * (1.0 + bound.abs()));
            }
            (shrink_step, shrink_run, block_avg)
        })
        .collect();
    let mut shrink_step = CheckOutcome::default();
    let mut shrink_run = CheckOutcome::default();
    let mut block_avg = CheckOutcome::default();
    for (a, b, c) in results {
        shrink_step = shrink_step.merge(a);
        shrink_run = shrink_run.merge(b);
        block_avg = block_avg.merge(c);
    }
    out.put("shrinkStep", shrink_step);
    out.put("shrinkRun", shrink_run);
    out.put("blockAverage", block_avg);

    // off W₀, return averages to I do not beat ψ(q)
    let rs = ReturnStructure::new(f, phi, g.i_arc, 2 * g.m0);
    let off_w0 = g
        .i_arc
        .samples(4 * samples)
        .into_par_iter()
        .map(|z| {
            let mut c = CheckOutcome::default();
            if g.w0.contains(z) {
                return c;
            }
            if let Some(ret) = rs.first_return(z) {
                c.record(ret.average() - g.psi_q - eta - g.psi_bar);
            }
            c
        })
        .reduce(CheckOutcome::default, CheckOutcome::merge);
    out.put("offW0Bound", off_w0);
    out
}

/// Evenly strided subset of at most `want` points.
fn thin(points: Vec<CirclePoint>, want: usize) -> Vec<CirclePoint> {
    if points.len() <= want {
        return points;
    }
    (0..want).map(|i| points[i * points.len() / want]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::CaseTag;

    #[test]
    fn nan_excess_is_a_violation() {
        let mut c = CheckOutcome::default();
        c.record(-1.0);
        c.record(f64::NAN);
        c.record(0.5);
        assert_eq!((c.checked, c.violations), (3, 2));
        assert_eq!(c.worst, f64::MAX);
    }

    #[test]
    fn thinning_keeps_spread() {
        let pts: Vec<CirclePoint> = (0..10).map(|i| CirclePoint::new(i as f64 / 10.0)).collect();
        let t = thin(pts.clone(), 5);
        assert_eq!(t, vec![pts[0], pts[2], pts[4], pts[6], pts[8]]);
        assert_eq!(thin(pts.clone(), 20), pts);
    }

    #[test]
    fn trivial_plan_runs_structural_suites_only() {
        let f = PlMap::doubling();
        let plan = PerturbationPlan::trivial(CaseTag::CaseI, CirclePoint::new(0.0), 1);
        let c = lemma_checks(&f, &f, &plan, &Potential::cosine(64, 1.0), 256, 10, 1e-6);
        let names: Vec<&str> = c.0.keys().map(String::as_str).collect();
        assert_eq!(names, ["homeoValid", "periodicity", "supportContainment"]);
        assert!(c.all_passed());
        assert_eq!(c.get("supportContainment").unwrap().checked, 256);
    }
}
