use super::PerturbationPlan;
use crate::circle::{CirclePoint, PlMap};
use crate::error::{Error, Result};

const SNAP_TRIGGER: f64 = 1e-14;
const PERIODIC_TOL: f64 = 1e-12;

/// `d(g^period(p), p)`.
pub fn orbit_residual(g: &PlMap, p: CirclePoint, period: usize) -> f64 {
    g.iterate(p, period).dist(p)
}

/// Composes the plan's homeomorphisms onto `f` with no validation or
/// snapping.
pub fn compose_unchecked(f: &PlMap, plan: &PerturbationPlan) -> PlMap {
    plan.steps.iter().fold(f.clone(), |g, t| g.compose_local(t))
}

/// Composes the plan's homeomorphisms onto `f` and checks that the periodic
/// point closes up. Rounding residue is removed by snapping the last orbit
/// point before the return once.
pub fn assemble(f: &PlMap, plan: &PerturbationPlan) -> Result<PlMap> {
    let mut g = f.clone();
    for t in &plan.steps {
        t.validate()?;
        g = g.compose_local(t);
    }
    let p = plan.periodic_point;
    let n = plan.period;
    if n == 0 {
        return Err(Error::Config("period must be positive".into()));
    }
    let mut residual = orbit_residual(&g, p, n);
    if residual > SNAP_TRIGGER && residual <= 1e-9 {
        let last = g.iterate(p, n - 1);
        g = g.with_snapped_value(last, p);
        residual = orbit_residual(&g, p, n);
    }
    if residual > PERIODIC_TOL {
        return Err(Error::PeriodicityLost { residual });
    }
    g.validate()?;
    Ok(g)
}
