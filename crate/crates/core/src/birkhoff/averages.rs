use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::birkhoff_sum;
use crate::circle::{CirclePoint, PlMap, Potential};
use crate::error::{Error, Result};
use crate::measure::UlamGraph;

/// `M_m = max over grid points of (1/m) S_m φ`, with an additive bar such that
/// the true supremum lies in `[M_m, M_m + bar]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteAverage {
    pub steps: usize,
    pub value: f64,
    pub argmax: CirclePoint,
    pub bar: f64,
}

impl FiniteAverage {
    pub fn upper(&self) -> f64 {
        self.value + self.bar
    }
}

/// `M_j` for `j = 1..=len` from one pass over the grid.
///
/// Two rigorous bars are available and the smaller is kept: the Lipschitz
/// chain `Lip(φ)(1 + s + … + s^{j-1}) h / j` with `s` the largest slope, and
/// the walk bound `W_j / j - M_j` from the outer bin graph at the grid
/// resolution, which stays small for expanding maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageTable {
    pub grid: usize,
    pub entries: Vec<FiniteAverage>,
}

impl AverageTable {
    pub fn compute(f: &PlMap, phi: &Potential, grid: usize, len: usize) -> Self {
        let graph = UlamGraph::build(f, phi, grid);
        AverageTable::compute_with_graph(f, phi, grid, len, &graph)
    }

    pub fn compute_with_graph(f: &PlMap, phi: &Potential, grid: usize, len: usize, graph: &UlamGraph) -> Self {
        assert!(len >= 1);
        let g = grid as f64;
        let chunk = 256;
        let partial: Vec<Vec<(f64, usize)>> = (0..grid)
            .collect::<Vec<_>>()
            .par_chunks(chunk)
            .map(|idx| {
                let mut best = vec![(f64::NEG_INFINITY, 0usize); len];
                for &i in idx {
                    let mut x = CirclePoint::new(i as f64 / g);
                    let mut sum = 0.0;
                    for (j, slot) in best.iter_mut().enumerate() {
                        sum += phi.eval(x);
                        let avg = sum / (j + 1) as f64;
                        if avg > slot.0 {
                            *slot = (avg, i);
                        }
                        x = f.eval(x);
                    }
                }
                best
            })
            .collect();
        let mut best = vec![(f64::NEG_INFINITY, 0usize); len];
        for part in partial {
            for (b, p) in best.iter_mut().zip(part) {
                if p.0 > b.0 || (p.0 == b.0 && p.1 < b.1) {
                    *b = p;
                }
            }
        }
        let walks = graph.walk_maxima(len);
        let s = f.max_abs_slope();
        let h = 1.0 / g;
        let mut geometric = 0.0;
        let mut power = 1.0;
        let entries = best
            .into_iter()
            .enumerate()
            .map(|(j, (value, i))| {
                let steps = j + 1;
                geometric += power;
                power *= s;
                let chain = phi.lipschitz() * geometric * h / steps as f64;
                let walk = (walks[j] / steps as f64 - value).max(0.0);
                FiniteAverage { steps, value, argmax: CirclePoint::new(i as f64 / g), bar: chain.min(walk) }
            })
            .collect();
        AverageTable { grid, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for `steps` (1-based).
    pub fn get(&self, steps: usize) -> &FiniteAverage {
        &self.entries[steps - 1]
    }

    /// Smallest `m` such that `M_j + bar_j <= a/2` for every `j` in `[m, 2m)`.
    /// Every `n >= m` is a sum of blocks with lengths in `[m, 2m)`, so the
    /// bound then holds for all `n >= m`.
    pub fn m_zero(&self, a: f64) -> Option<usize> {
        let ok: Vec<bool> = self.entries.iter().map(|e| e.upper() <= a / 2.0).collect();
        (1..=self.len() / 2 + 1).find(|&m| {
            let end = 2 * m - 1;
            end <= self.len() && ok[m - 1..end].iter().all(|&b| b)
        })
    }
}

/// Single `M_m` with its bar.
pub fn max_finite_average(f: &PlMap, phi: &Potential, m: usize, grid: usize) -> FiniteAverage {
    assert!(m >= 1);
    if phi.lipschitz() == 0.0 {
        // constant potential: every average equals the constant
        let r = birkhoff_sum(f, phi, CirclePoint::new(0.0), m);
        let chain = 0.0;
        return FiniteAverage { steps: m, value: r.average, argmax: CirclePoint::new(0.0), bar: chain };
    }
    *AverageTable::compute(f, phi, grid, m).get(m)
}

/// `m₀(a)`: grows the table until the window condition holds or `horizon`
/// is exceeded.
pub fn m_zero(f: &PlMap, phi: &Potential, a: f64, grid: usize, horizon: usize) -> Result<usize> {
    m_zero_with_table(f, phi, a, grid, horizon).map(|(m, _)| m)
}

/// [`m_zero`] together with the table that certified it.
pub fn m_zero_with_table(f: &PlMap, phi: &Potential, a: f64, grid: usize, horizon: usize) -> Result<(usize, AverageTable)> {
    if !(a > 0.0) {
        return Err(Error::Config(format!("m_zero needs a > 0, got {a}")));
    }
    let graph = UlamGraph::build(f, phi, grid);
    let mut len = 16usize;
    loop {
        let table = AverageTable::compute_with_graph(f, phi, grid, len.min(2 * horizon), &graph);
        if let Some(m) = table.m_zero(a) {
            if m <= horizon {
                return Ok((m, table));
            }
        }
        if len >= 2 * horizon {
            return Err(Error::MZeroNotFound { horizon, threshold: a / 2.0 });
        }
        len *= 2;
    }
}
