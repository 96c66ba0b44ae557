//! Outer Ulam discretization.
//!
//! Bins are `[i/n, (i+1)/n)`. Bin `i` has an edge to bin `j` whenever the
//! image of bin `i` meets bin `j`, and carries the exact maximum of the
//! potential over the closed bin. Every orbit of `f` is a walk in this graph
//! and every invariant measure induces a normalized circulation on it, so the
//! maximum cycle mean bounds `sup ∫φ dμ` from above. The circulation LP
//! attains its optimum at a single cycle; the maximum cycle mean is computed
//! exactly with Karp's recurrence.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{CirclePoint, PlMap, Potential};
use crate::error::{Error, Result};

/// Bin graph of `f` with per-bin potential maxima.
#[derive(Debug, Clone)]
pub struct UlamGraph {
    bins: usize,
    successors: Vec<Vec<u32>>,
    weights: Vec<f64>,
}

impl UlamGraph {
    pub fn build(f: &PlMap, phi: &Potential, bins: usize) -> Self {
        let n = bins as f64;
        let rows: Vec<(Vec<u32>, f64)> = (0..bins)
            .into_par_iter()
            .map(|i| {
                let a = i as f64 / n;
                let b = (i + 1) as f64 / n;
                (image_bins(f, a, b, bins), phi.max_on(a, b))
            })
            .collect();
        let (successors, weights) = rows.into_iter().unzip();
        UlamGraph { bins, successors, weights }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn successors(&self, bin: usize) -> &[u32] {
        &self.successors[bin]
    }

    pub fn weight(&self, bin: usize) -> f64 {
        self.weights[bin]
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn bin_of(&self, x: CirclePoint) -> usize {
        ((x.value() * self.bins as f64) as usize).min(self.bins - 1)
    }

    pub fn bin_center(&self, bin: usize) -> CirclePoint {
        CirclePoint::new((bin as f64 + 0.5) / self.bins as f64)
    }

    /// One step of the walk recurrence: `next[v] = w[v] + max_{u→v} prev[u]`,
    /// with `prev` indexed by bin.
    fn push(&self, prev: &[f64], next: &mut [f64], add_source_weight: bool) {
        next.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
        for (u, succ) in self.successors.iter().enumerate() {
            let base = prev[u];
            if base == f64::NEG_INFINITY {
                continue;
            }
            let val = if add_source_weight { base + self.weights[u] } else { base };
            for &v in succ {
                let slot = &mut next[v as usize];
                if val > *slot {
                    *slot = val;
                }
            }
        }
    }

    /// `W_j = max over walks of j bins of the summed bin weights`, for
    /// `j = 1..=len`. `W_j / j` bounds `sup_x (1/j) S_j(x)` from above.
    pub fn walk_maxima(&self, len: usize) -> Vec<f64> {
        let mut cur = self.weights.clone();
        let mut next = vec![0.0; self.bins];
        let mut out = Vec::with_capacity(len);
        out.push(cur.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        for _ in 1..len {
            self.push(&cur, &mut next, false);
            for (v, x) in next.iter_mut().enumerate() {
                *x += self.weights[v];
            }
            std::mem::swap(&mut cur, &mut next);
            out.push(cur.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        out
    }

    /// Maximum cycle mean and one cycle attaining it (Karp).
    pub fn max_cycle_mean(&self) -> Result<(f64, Vec<usize>)> {
        let n = self.bins;
        if n > u16::MAX as usize + 1 {
            return Err(Error::Config(format!("{n} bins exceed the predecessor table width")));
        }
        // forward pass: D_n and predecessor table
        let mut preds: Vec<u16> = vec![0; n * (n + 1)];
        let mut cur = vec![0.0f64; n];
        let mut next = vec![0.0f64; n];
        for k in 1..=n {
            next.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
            let row = &mut preds[k * n..(k + 1) * n];
            for (u, succ) in self.successors.iter().enumerate() {
                if cur[u] == f64::NEG_INFINITY {
                    continue;
                }
                let val = cur[u] + self.weights[u];
                for &v in succ {
                    let v = v as usize;
                    if val > next[v] {
                        next[v] = val;
                        row[v] = u as u16;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        let dn = cur;
        // second pass: min over k of (D_n - D_k) / (n - k)
        let mut ratio = vec![f64::INFINITY; n];
        let mut dk = vec![0.0f64; n];
        for k in 0..n {
            for v in 0..n {
                if dn[v] > f64::NEG_INFINITY && dk[v] > f64::NEG_INFINITY {
                    let r = (dn[v] - dk[v]) / (n - k) as f64;
                    if r < ratio[v] {
                        ratio[v] = r;
                    }
                }
            }
            self.push(&dk.clone(), &mut next, true);
            std::mem::swap(&mut dk, &mut next);
        }
        let (best_v, best) = ratio
            .iter()
            .enumerate()
            .filter(|(v, _)| dn[*v] > f64::NEG_INFINITY)
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (v, &r)| if r > acc.1 { (v, r) } else { acc });
        if best_v == usize::MAX {
            return Err(Error::LpInfeasible("no closed walk in the bin graph".into()));
        }
        // walk back along predecessors and keep the best cycle on the walk
        let mut walk = vec![best_v; n + 1];
        for k in (1..=n).rev() {
            walk[k - 1] = preds[k * n + walk[k]] as usize;
        }
        let mut last_seen = vec![usize::MAX; n];
        let mut best_cycle: Vec<usize> = Vec::new();
        let mut best_mean = f64::NEG_INFINITY;
        for (i, &v) in walk.iter().enumerate() {
            let j = last_seen[v];
            if j != usize::MAX {
                let cyc = &walk[j..i];
                let mean = cyc.iter().map(|&u| self.weights[u]).sum::<f64>() / cyc.len() as f64;
                if mean > best_mean {
                    best_mean = mean;
                    best_cycle = cyc.to_vec();
                }
            }
            last_seen[v] = i;
        }
        Ok((best, best_cycle))
    }

    /// Mass fractions of bin `i` landing in each bin `j`.
    pub fn transition_row(f: &PlMap, bins: usize, i: usize) -> Vec<(usize, f64)> {
        let n = bins as f64;
        let (a, b) = (i as f64 / n, (i + 1) as f64 / n);
        let mut cuts = vec![a, b];
        for &t in f.breakpoints() {
            for shift in [-1.0, 0.0, 1.0] {
                let x = t + shift;
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut add = |j: usize, m: f64| {
            if let Some(slot) = row.iter_mut().find(|(k, _)| *k == j) {
                slot.1 += m;
            } else {
                row.push((j, m));
            }
        };
        for w in cuts.windows(2) {
            let (s, e) = (w[0], w[1]);
            let (ys, ye) = (f.lift(s), f.lift(e));
            let len = e - s;
            if ys == ye {
                add(((ys.rem_euclid(1.0)) * n) as usize % bins, len * n);
                continue;
            }
            let (lo, hi) = if ys < ye { (ys, ye) } else { (ye, ys) };
            let first = (lo * n).floor() as i64;
            let last = (hi * n).ceil() as i64;
            for j in first..last {
                let c = j as f64 / n;
                let d = (j + 1) as f64 / n;
                let overlap = (hi.min(d) - lo.max(c)).max(0.0);
                if overlap > 0.0 {
                    add(j.rem_euclid(bins as i64) as usize, overlap / (hi - lo) * len * n);
                }
            }
        }
        row.sort_by_key(|r| r.0);
        row
    }
}

/// Bins met by the image of the half-open bin `[a, b)`.
fn image_bins(f: &PlMap, a: f64, b: f64, bins: usize) -> Vec<u32> {
    let n = bins as f64;
    let fb = f.lift(b);
    let mut lo = f.lift(a);
    let mut hi_without_b = lo;
    for &t in f.breakpoints() {
        for shift in [-1.0, 0.0, 1.0] {
            let x = t + shift;
            if x > a && x < b {
                let y = f.lift(x);
                lo = lo.min(y);
                hi_without_b = hi_without_b.max(y);
            }
        }
    }
    lo = lo.min(fb);
    let (hi, exclusive) = if fb > hi_without_b { (fb, true) } else { (hi_without_b, false) };
    if hi - lo >= 1.0 {
        return (0..bins as u32).collect();
    }
    let first = (lo * n).floor() as i64;
    let last = if exclusive { (hi * n).ceil() as i64 - 1 } else { (hi * n).floor() as i64 };
    let mut out: Vec<u32> = (first..=last.max(first)).map(|j| j.rem_euclid(bins as i64) as u32).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Certified upper bound on `sup ∫φ dμ` over invariant measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamBound {
    /// Maximum cycle mean of bin maxima; never below the true supremum.
    pub value: f64,
    /// Width of the discretization bar, `Lip(φ) / bins`.
    pub bar: f64,
    pub bins: usize,
    /// Bins of an optimal cycle, heaviest potential first.
    pub cycle: Vec<usize>,
}

impl UlamBound {
    /// Candidate points of the support of a maximizing measure: centres of
    /// the optimal cycle's bins, heaviest bin potential first.
    pub fn support_proxies(&self) -> Vec<CirclePoint> {
        let n = self.bins as f64;
        self.cycle.iter().map(|&b| CirclePoint::new((b as f64 + 0.5) / n)).collect()
    }
}

pub fn ulam_upper_bound(f: &PlMap, phi: &Potential, bins: usize) -> Result<UlamBound> {
    if bins < 16 {
        return Err(Error::Config(format!("need at least 16 bins, got {bins}")));
    }
    let graph = UlamGraph::build(f, phi, bins);
    let (value, mut cycle) = graph.max_cycle_mean()?;
    cycle.sort_by(|&a, &b| graph.weight(b).total_cmp(&graph.weight(a)).then(a.cmp(&b)));
    Ok(UlamBound { value, bar: phi.lipschitz() / bins as f64, bins, cycle })
}

/// Writes the transition matrix as `row,col,mass` lines.
pub fn write_transition_csv(f: &PlMap, bins: usize, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "row,col,mass")?;
    for i in 0..bins {
        for (j, m) in UlamGraph::transition_row(f, bins, i) {
            writeln!(out, "{i},{j},{m:.17e}")?;
        }
    }
    Ok(())
}
