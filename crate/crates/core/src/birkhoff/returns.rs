use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AverageTable, BirkhoffRecord};
use crate::circle::{Arc, CirclePoint, PlMap, Potential};
use crate::error::{Error, Result};

/// Slack turning exact sign conditions on `S_n` into checkable inequalities:
/// `S_n >= -threshold(n)` stands for `S_n >= 0`.
///
/// `per_step` absorbs the uncertainty in the normalizing constant (the gap
/// between the certified upper bound and the best orbit found), which enters
/// `S_n` once per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub eta: f64,
    pub per_step: f64,
}

impl Slack {
    pub fn new(eta: f64) -> Self {
        Slack { eta, per_step: 0.0 }
    }

    pub fn threshold(&self, steps: usize) -> f64 {
        self.eta + self.per_step * steps as f64
    }
}

/// A grid point of `B` returning to `B` with a large Birkhoff sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnHit {
    pub start: CirclePoint,
    pub steps: usize,
    pub sum: f64,
    pub end: CirclePoint,
}

/// Searches grid points `y ∈ B` and `n <= horizon` with `f^n(y) ∈ B` for the
/// largest `S_n(y)`. Returns `None` when even the best return falls below
/// `-slack.threshold(n)`. Ties prefer starts nearer the centre of `B`, then
/// shorter returns.
pub fn find_nonneg_return(
    f: &PlMap,
    phi: &Potential,
    ball: &Arc,
    horizon: usize,
    grid: usize,
    slack: Slack,
) -> Option<ReturnHit> {
    let starts = ball.grid_points(grid);
    let hits: Vec<Option<(ReturnHit, f64)>> = starts
        .par_iter()
        .map(|&y| {
            let mut x = y;
            let mut sum = 0.0;
            let mut best: Option<(ReturnHit, f64)> = None;
            for n in 1..=horizon {
                sum += phi.eval(x);
                x = f.eval(x);
                if ball.contains(x) {
                    let excess = sum + slack.threshold(n);
                    if best.map_or(true, |(b, _)| sum > b.sum) {
                        best = Some((ReturnHit { start: y, steps: n, sum, end: x }, excess));
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<(ReturnHit, f64)> = None;
    for (hit, excess) in hits.into_iter().flatten() {
        if excess < 0.0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, _)) => {
                if (hit.sum - b.sum).abs() > 1e-12 {
                    hit.sum > b.sum
                } else {
                    let (dh, db) = (ball.center.dist(hit.start), ball.center.dist(b.start));
                    dh < db || (dh == db && hit.steps < b.steps)
                }
            }
        };
        if better {
            best = Some((hit, excess));
        }
    }
    best.map(|(h, _)| h)
}

/// `c̄ = max_{k <= m₀} c_k` with `c_k` the best grid average over
/// `K_k = B[x₀] ∩ f^{-k}(B[x₀])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CBar {
    pub value: f64,
    /// Rigorous upper bound on the true `c̄`.
    pub upper: f64,
    pub witness: BirkhoffRecord,
    /// `f^k(z)` for the witness.
    pub end: CirclePoint,
    /// Grid `c_k` for `k = 1..=m₀`; `None` when `K_k` has no grid point.
    pub per_step: Vec<Option<f64>>,
}

impl CBar {
    pub fn bar(&self) -> f64 {
        self.upper - self.value
    }
}

pub fn c_bar(
    f: &PlMap,
    phi: &Potential,
    x0: CirclePoint,
    radius: f64,
    m0: usize,
    grid: usize,
    table: Option<&AverageTable>,
) -> Result<CBar> {
    let ball = Arc::closed(x0, radius)?;
    let starts = ball.grid_points(grid);
    let rows: Vec<Vec<Option<(f64, CirclePoint)>>> = starts
        .par_iter()
        .map(|&z| {
            let mut x = z;
            let mut sum = 0.0;
            let mut row = vec![None; m0];
            for (k, slot) in row.iter_mut().enumerate() {
                sum += phi.eval(x);
                x = f.eval(x);
                if ball.contains(x) {
                    *slot = Some((sum / (k + 1) as f64, x));
                }
            }
            row
        })
        .collect();
    let mut per_step: Vec<Option<f64>> = vec![None; m0];
    let mut best: Option<(f64, usize, usize, CirclePoint)> = None;
    for (zi, row) in rows.iter().enumerate() {
        for (k, cell) in row.iter().enumerate() {
            if let Some((avg, end)) = *cell {
                per_step[k] = Some(per_step[k].map_or(avg, |c: f64| c.max(avg)));
                let better = match best {
                    None => true,
                    Some((b, bk, _, _)) => avg > b + 1e-12 || ((avg - b).abs() <= 1e-12 && k < bk),
                };
                if better {
                    best = Some((avg, k, zi, end));
                }
            }
        }
    }
    let (value, k, zi, end) = best.ok_or(Error::EmptyReturnSet)?;
    let s = f.max_abs_slope();
    let h = 1.0 / grid as f64;
    let mut geometric = 0.0;
    let mut power = 1.0;
    let mut upper = value;
    for (j, ck) in per_step.iter().enumerate() {
        geometric += power;
        power *= s;
        let chain = phi.lipschitz() * geometric * h / (j + 1) as f64;
        let local = ck.map_or(f64::INFINITY, |c| c + chain);
        let global = table.filter(|t| t.len() > j).map_or(f64::INFINITY, |t| t.get(j + 1).upper());
        let cap = local.min(global);
        if cap.is_finite() {
            upper = upper.max(cap);
        }
    }
    let steps = k + 1;
    let start = starts[zi];
    let sum = value * steps as f64;
    Ok(CBar {
        value,
        upper,
        witness: BirkhoffRecord { start, steps, sum, average: value },
        end,
        per_step,
    })
}

/// One excursion from a point of the domain back into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstReturn {
    pub time: usize,
    pub image: CirclePoint,
    pub sum: f64,
}

impl FirstReturn {
    /// `ψ`, the average of `φ` along the excursion.
    pub fn average(&self) -> f64 {
        self.sum / self.time as f64
    }
}

/// First-return data `N_ret`, `f₂`, `ψ` on a domain, truncated at `horizon`.
/// Points that do not return within the horizon are treated as outside `D`.
#[derive(Debug, Clone)]
pub struct ReturnStructure<'a> {
    pub map: &'a PlMap,
    pub phi: &'a Potential,
    pub domain: Arc,
    pub horizon: usize,
}

impl<'a> ReturnStructure<'a> {
    pub fn new(map: &'a PlMap, phi: &'a Potential, domain: Arc, horizon: usize) -> Self {
        ReturnStructure { map, phi, domain, horizon }
    }

    pub fn first_return(&self, z: CirclePoint) -> Option<FirstReturn> {
        let mut x = z;
        let mut sum = 0.0;
        for j in 1..=self.horizon {
            sum += self.phi.eval(x);
            x = self.map.eval(x);
            if self.domain.contains(x) {
                return Some(FirstReturn { time: j, image: x, sum });
            }
        }
        None
    }

    pub fn return_time(&self, z: CirclePoint) -> Option<usize> {
        self.first_return(z).map(|r| r.time)
    }

    pub fn return_map(&self, z: CirclePoint) -> Option<CirclePoint> {
        self.first_return(z).map(|r| r.image)
    }

    pub fn psi(&self, z: CirclePoint) -> Option<f64> {
        self.first_return(z).map(|r| r.average())
    }

    /// First returns of the domain's grid points.
    pub fn table(&self, grid: usize) -> Vec<(CirclePoint, Option<FirstReturn>)> {
        self.domain.grid_points(grid).into_par_iter().map(|z| (z, self.first_return(z))).collect()
    }
}
