use serde::{Deserialize, Serialize};

use super::{assemble, CaseReport, CaseTag, PerturbationPlan};
use crate::birkhoff::{c_bar, find_nonneg_return, m_zero_with_table, Slack};
use crate::circle::{Arc, CirclePoint, LocalHomeo, PlMap, Potential};
use crate::error::{Error, Result};

/// Numerical knobs of the case split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseParams {
    /// Radius of `B(x)` and `B[x₀]`.
    pub radius: f64,
    pub grid: usize,
    /// Longest return searched for by the case split.
    pub horizon: usize,
    /// Largest admissible `m₀`.
    pub m0_horizon: usize,
    pub slack: Slack,
    /// `δ_bd`: witness images closer than this to `∂B[x₀]` count as boundary hits.
    pub boundary_tol: f64,
}

/// One excursion between consecutive visits to a ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub start: CirclePoint,
    pub steps: usize,
    pub sum: f64,
    pub end: CirclePoint,
}

impl Block {
    pub fn average(&self) -> f64 {
        self.sum / self.steps as f64
    }
}

/// Cuts the orbit segment `start, …, f^steps(start)` at its intermediate
/// visits to `ball`.
pub fn decompose_returns(f: &PlMap, phi: &Potential, ball: &Arc, start: CirclePoint, steps: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut cur = Block { start, steps: 0, sum: 0.0, end: start };
    let mut x = start;
    for j in 1..=steps {
        cur.sum += phi.eval(x);
        cur.steps += 1;
        x = f.eval(x);
        if j == steps || ball.contains(x) {
            cur.end = x;
            blocks.push(cur);
            cur = Block { start: x, steps: 0, sum: 0.0, end: x };
        }
    }
    blocks
}

fn best_block(blocks: &[Block]) -> Block {
    let mut best = blocks[0];
    for b in &blocks[1..] {
        if b.average() > best.average() + 1e-15 {
            best = *b;
        }
    }
    best
}

/// Decides between Case I and Case II around the support proxy `x`, and in
/// Case II computes `m₀`, `c̄` and the subcase.
pub fn case_split(f: &PlMap, phi: &Potential, x: CirclePoint, params: &CaseParams) -> Result<CaseReport> {
    let r = params.radius;
    let ball = Arc::open(x, r)?;
    let hit = find_nonneg_return(f, phi, &ball, params.horizon, params.grid, params.slack)
        .ok_or_else(|| Error::NotFound(format!("no near-zero return to B({}, {r})", x.value())))?;
    let mut report = CaseReport {
        tag: CaseTag::CaseI,
        x,
        radius: r,
        x0: hit.start,
        n0: hit.steps,
        sum: hit.sum,
        a0: None,
        m0: None,
        c_bar: None,
        q: None,
        q0: None,
        n_q: None,
        z1: None,
        n_z1: None,
    };
    if hit.sum <= params.slack.eta {
        let block = best_block(&decompose_returns(f, phi, &ball, hit.start, hit.steps));
        report.x0 = block.start;
        report.n0 = block.steps;
        report.sum = block.sum;
        return Ok(report);
    }

    let a0 = hit.sum / hit.steps as f64;
    let mut a = a0;
    let mut round = 0;
    let (m0, cb) = loop {
        let (m, table) = m_zero_with_table(f, phi, a, params.grid, params.m0_horizon)?;
        let m0 = m.max(hit.steps + 1);
        let cb = c_bar(f, phi, hit.start, r, m0, params.grid, Some(&table))?;
        round += 1;
        // c̄ below a₀ means m₀ must be recomputed for the smaller threshold
        if cb.value >= a || round == 8 {
            break (m0, cb);
        }
        if cb.value <= params.slack.eta {
            return Err(Error::NotFound(format!("c̄ = {} does not exceed η", cb.value)));
        }
        a = cb.value;
    };
    report.tag = CaseTag::CaseIIb;
    report.a0 = Some(a0);
    report.m0 = Some(m0);
    let closed = Arc::closed(hit.start, r)?;
    let w = cb.witness;
    let block = best_block(&decompose_returns(f, phi, &closed, w.start, w.steps));
    if closed.depth(block.end) >= params.boundary_tol && closed.depth(block.start) > 0.0 {
        report.tag = CaseTag::CaseIIa;
        report.q = Some(block.start);
        report.q0 = Some(block.end);
        report.n_q = Some(block.steps);
    } else {
        report.q0 = Some(block.end);
        report.z1 = Some(block.start);
        report.n_z1 = Some(block.steps);
    }
    report.c_bar = Some(cb);
    Ok(report)
}

fn single_move(
    f: &PlMap,
    case: CaseTag,
    support: Arc,
    point: CirclePoint,
    period: usize,
) -> Result<(PlMap, PerturbationPlan)> {
    let target = f.iterate(point, period);
    let mut plan = PerturbationPlan::trivial(case, point, period);
    if target.dist(point) > 0.0 {
        let t = LocalHomeo::moving(support, target, point)?;
        plan.steps.push(t);
        plan.support_arcs.push(support);
    }
    let g = assemble(f, &plan)?;
    Ok((g, plan))
}

/// Case I: `f̃ = T∘f` with `T` supported in `B` sending `f^{n₁}(x₀)` to `x₀`.
pub fn perturb_case_one(f: &PlMap, _phi: &Potential, report: &CaseReport, ball: &Arc) -> Result<(PlMap, PerturbationPlan)> {
    if report.tag != CaseTag::CaseI {
        return Err(Error::Config("perturb_case_one needs a Case I report".into()));
    }
    let support = Arc::closed(ball.center, ball.radius)?;
    let (g, mut plan) = single_move(f, CaseTag::CaseI, support, report.x0, report.n0)?;
    plan.report = Some(report.clone());
    Ok((g, plan))
}

/// Case IIa: `f̃ = T∘f` with `T` supported in `B[x₀]` sending `f^{n_q}(q)` to `q`.
pub fn perturb_case_a(f: &PlMap, _phi: &Potential, report: &CaseReport, ball: &Arc) -> Result<(PlMap, PerturbationPlan)> {
    let (Some(q), Some(n_q)) = (report.q, report.n_q) else {
        return Err(Error::Config("perturb_case_a needs a Case IIa report".into()));
    };
    if report.tag != CaseTag::CaseIIa {
        return Err(Error::Config("perturb_case_a needs a Case IIa report".into()));
    }
    let support = Arc::closed(ball.center, ball.radius)?;
    let (g, mut plan) = single_move(f, CaseTag::CaseIIa, support, q, n_q)?;
    plan.report = Some(report.clone());
    Ok((g, plan))
}
