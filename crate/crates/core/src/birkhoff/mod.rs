//! Birkhoff sums along orbits, finite-time maximal averages, the `m₀`
//! threshold, recurrence searches and first-return structures.

mod averages;
mod returns;

pub use averages::{m_zero, m_zero_with_table, max_finite_average, AverageTable, FiniteAverage};
pub use returns::{c_bar, find_nonneg_return, CBar, FirstReturn, ReturnHit, ReturnStructure, Slack};

use serde::{Deserialize, Serialize};

use crate::circle::{CirclePoint, PlMap, Potential};

/// `S_n φ(x)` together with its average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffRecord {
    pub start: CirclePoint,
    pub steps: usize,
    pub sum: f64,
    pub average: f64,
}

/// `S_n φ(x) = Σ_{i<n} φ(f^i x)`.
pub fn birkhoff_sum(f: &PlMap, phi: &Potential, x: CirclePoint, n: usize) -> BirkhoffRecord {
    assert!(n >= 1, "Birkhoff sums need at least one step");
    let mut y = x;
    let mut sum = 0.0;
    for _ in 0..n {
        sum += phi.eval(y);
        y = f.eval(y);
    }
    BirkhoffRecord { start: x, steps: n, sum, average: sum / n as f64 }
}
