use serde::{Deserialize, Serialize};

use super::geometry::source_setup;
use super::{
    assemble, build_t2, case_split, lambda_schedule, perturb_case_a, perturb_case_one, CaseParams, CaseReport, CaseTag,
    PerturbationPlan,
};
use crate::birkhoff::{AverageTable, Slack};
use crate::circle::{Arc, PlMap, Potential};
use crate::error::{Error, Result};
use crate::measure::{best_periodic_orbit_capped, normalize, random_tail_average, ulam_upper_bound, RandomOrbits};

/// Radius of the working balls as a fraction of `ε`; two radii fit in `ε`.
pub const RADIUS_FRACTION: f64 = 0.45;
/// Cap on `δ` as a fraction of `ε`.
pub const DELTA_FRACTION: f64 = 0.05;
/// Support proxies tried per radius.
pub const PROXIES_PER_RADIUS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineOptions {
    pub epsilon: f64,
    pub grid: usize,
    pub bins: usize,
    pub horizon_factor: usize,
    pub tol: f64,
    pub eta: f64,
    pub random: RandomOrbits,
    pub max_period: usize,
    pub retries: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            epsilon: 0.1,
            grid: 1 << 14,
            bins: 1 << 12,
            horizon_factor: 4,
            tol: 1e-3,
            eta: 1e-6,
            random: RandomOrbits::default(),
            max_period: 10,
            retries: 3,
        }
    }
}

impl PipelineOptions {
    /// Return-search horizon: `horizon_factor · log₂(grid)`.
    pub fn horizon(&self) -> usize {
        self.horizon_factor * self.grid.trailing_zeros() as usize
    }

    pub fn m0_horizon(&self) -> usize {
        self.horizon_factor * 256
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineOutput {
    pub f_hat: PlMap,
    pub plan: PerturbationPlan,
    /// `φ₀ − β` with `β` the Ulam upper bound for `f`.
    pub phi: Potential,
    pub beta_upper: f64,
    pub beta_lower: f64,
    pub epsilon_used: f64,
    /// One line per failed attempt.
    pub attempts: Vec<String>,
}

/// Case IIb: `f̂ = T₂∘T₁∘f`, with `α` the periodic source.
pub fn perturb_case_b(
    f: &PlMap,
    phi: &Potential,
    report: &CaseReport,
    grid: usize,
    eta: f64,
    delta_cap: f64,
) -> Result<(PlMap, PerturbationPlan)> {
    let (Some(m0), Some(cb), Some(q0)) = (report.m0, report.c_bar.as_ref(), report.q0) else {
        return Err(Error::Config("perturb_case_b needs a Case IIb report".into()));
    };
    let ball = Arc::closed(report.x0, report.radius)?;
    let table = AverageTable::compute(f, phi, grid, m0);
    let setup = source_setup(f, phi, &ball, q0, m0, cb.value, eta, grid, delta_cap, Some(&table))?;
    let g = &setup.geometry;
    let mut plan = PerturbationPlan::trivial(CaseTag::CaseIIb, g.alpha, g.n_q);
    plan.steps.push(setup.t1.clone());
    plan.support_arcs.push(setup.t1.support);
    let f_tilde = assemble(f, &plan)?;
    match lambda_schedule(f, &f_tilde, &setup, eta) {
        Ok(schedule) => match build_t2(&schedule) {
            Ok(t2) => {
                plan.support_arcs.push(t2.support);
                plan.steps.push(t2);
                plan.schedule = Some(schedule);
            }
            Err(Error::FlatP(_)) => {}
            Err(e) => return Err(e),
        },
        Err(Error::FlatP(_)) => {}
        Err(e) => return Err(e),
    }
    let mut report = report.clone();
    report.q = Some(g.q);
    report.n_q = Some(g.n_q);
    plan.report = Some(report);
    plan.geometry = Some(setup.geometry.clone());
    let f_hat = assemble(f, &plan)?;
    Ok((f_hat, plan))
}

fn attempt(
    f: &PlMap,
    phi: &Potential,
    x: crate::CirclePoint,
    epsilon: f64,
    opts: &PipelineOptions,
    slack: Slack,
) -> Result<(PlMap, PerturbationPlan)> {
    let radius = RADIUS_FRACTION * epsilon;
    let params = CaseParams {
        radius,
        grid: opts.grid,
        horizon: opts.horizon(),
        m0_horizon: opts.m0_horizon(),
        slack,
        boundary_tol: 2.0 / opts.grid as f64,
    };
    let report = case_split(f, phi, x, &params)?;
    let (f_hat, plan) = match report.tag {
        CaseTag::CaseI => perturb_case_one(f, phi, &report, &Arc::open(x, radius)?)?,
        CaseTag::CaseIIa => perturb_case_a(f, phi, &report, &Arc::closed(report.x0, radius)?)?,
        CaseTag::CaseIIb => perturb_case_b(f, phi, &report, opts.grid, opts.eta, DELTA_FRACTION * epsilon)?,
    };
    let d = f.c0_distance(&f_hat);
    if d >= epsilon {
        return Err(Error::DegenerateGeometry(format!("perturbation moved {d} >= {epsilon}")));
    }
    Ok((f_hat, plan))
}

/// The full construction with the retry ladder: each retryable failure moves
/// to the next support proxy, and after the proxies run out `ε` is halved,
/// up to `opts.retries` times.
pub fn run_pipeline(f: &PlMap, phi0: &Potential, opts: &PipelineOptions) -> Result<PipelineOutput> {
    let upper = ulam_upper_bound(f, phi0, opts.bins)?;
    let (periodic, _) = best_periodic_orbit_capped(f, phi0, opts.max_period);
    let tail = random_tail_average(f, phi0, opts.random);
    let beta_lower = periodic.map_or(tail, |(_, avg)| avg.max(tail));
    let beta_upper = upper.value;
    let phi = normalize(phi0, beta_upper);
    let slack = Slack { eta: opts.eta, per_step: (beta_upper - beta_lower).max(0.0) };
    let proxies = upper.support_proxies();
    let mut attempts = Vec::new();
    let mut epsilon = opts.epsilon;
    for _ in 0..=opts.retries {
        for &x in proxies.iter().take(PROXIES_PER_RADIUS) {
            match attempt(f, &phi, x, epsilon, opts, slack) {
                Ok((f_hat, mut plan)) => {
                    plan.beta = beta_upper;
                    return Ok(PipelineOutput { f_hat, plan, phi, beta_upper, beta_lower, epsilon_used: epsilon, attempts });
                }
                Err(e) if e.is_retryable() => attempts.push(format!("eps {epsilon}, x {}: {e}", x.value())),
                Err(e) => return Err(e),
            }
        }
        epsilon /= 2.0;
    }
    Err(Error::NotFound(format!("retry ladder exhausted: {}", attempts.join("; "))))
}
