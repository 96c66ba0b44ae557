use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::birkhoff::{birkhoff_sum, AverageTable};
use crate::circle::{Arc, CirclePoint, LocalHomeo, PlMap, Potential};
use crate::error::{Error, Result};

/// Default cap on the backward preimage search.
pub const PREIMAGE_NODE_CAP: usize = 1 << 22;
/// Samples of `ψ` across `W₀`.
pub const PSI_SAMPLES: usize = 1 << 16;

/// Affine branch of `f^n` starting at `z` in direction `dir` (±1).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBranch {
    /// Signed slope of `f^n` on the branch.
    pub slope: f64,
    /// Largest `t` with `f^n` affine on `[z, z + dir·t]`.
    pub extent: f64,
    /// `|(f^j)'|` for `j = 0..n`.
    pub partial_slopes: Vec<f64>,
}

fn piece_on_side(bps: &[f64], x: f64, dir: f64) -> (usize, f64) {
    let k = bps.len() - 1;
    if dir > 0.0 {
        let i = bps.partition_point(|&b| b <= x).clamp(1, k) - 1;
        (i, bps[i + 1] - x)
    } else {
        let xv = if x == 0.0 { 1.0 } else { x };
        let i = bps.partition_point(|&b| b < xv).clamp(1, k) - 1;
        (i, xv - bps[i])
    }
}

pub fn local_branch(f: &PlMap, z: CirclePoint, n: usize, dir: f64) -> LocalBranch {
    let bps = f.breakpoints();
    let mut x = z;
    let mut d = dir.signum();
    let mut cum = 1.0;
    let mut sign = 1.0;
    let mut extent = f64::INFINITY;
    let mut partial = Vec::with_capacity(n);
    for _ in 0..n {
        partial.push(cum);
        let (piece, room) = piece_on_side(bps, x.value(), d);
        extent = extent.min(room / cum);
        let s = f.slope(piece);
        cum *= s.abs();
        sign *= s.signum();
        d *= s.signum();
        x = f.eval(x);
    }
    LocalBranch { slope: sign * cum, extent, partial_slopes: partial }
}

/// Scalars of the Case IIb construction, kept in the plan for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Geometry {
    pub q0: CirclePoint,
    pub q: CirclePoint,
    pub n_q: usize,
    /// `+1` when `q₀` lies in the increasing direction from `q`.
    pub orientation: f64,
    pub e: Arc,
    pub delta: f64,
    pub i_arc: Arc,
    pub w0: Arc,
    pub branch_slope: f64,
    pub m0: usize,
    pub c_bar: f64,
    pub z_max: CirclePoint,
    pub alpha: CirclePoint,
    pub f2_alpha: CirclePoint,
    pub psi_q: f64,
    pub psi_alpha: f64,
    pub psi_max: f64,
    /// `ψ(z_max)` plus the sampling bar.
    pub psi_max_upper: f64,
    pub psi_bar: f64,
    pub delta3: f64,
    pub v_l: Arc,
    pub w_alpha: Arc,
}

impl Geometry {
    /// `z ∈ W_α`: inside `W₀` with `f^{n_q}(z) ∈ V(L)`.
    pub fn in_w_alpha(&self, f: &PlMap, z: CirclePoint) -> bool {
        self.w0.contains(z) && self.v_l.contains(f.iterate(z, self.n_q))
    }
}

/// `ψ` sampled across `W₀ = [q, q + o·w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSamples {
    pub q: CirclePoint,
    pub orientation: f64,
    pub width: f64,
    pub values: Vec<f64>,
    pub bar: f64,
}

impl PsiSamples {
    pub fn step(&self) -> f64 {
        self.width / (self.values.len() - 1) as f64
    }

    pub fn point(&self, k: usize) -> CirclePoint {
        CirclePoint::new(self.q.value() + self.orientation * self.step() * k as f64)
    }
}

/// Output of [`choose_alpha`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alpha {
    pub index: usize,
    pub alpha: CirclePoint,
    pub z_max: CirclePoint,
    pub psi_alpha: f64,
    pub psi_q: f64,
    pub psi_max: f64,
    pub psi_max_upper: f64,
}

/// Everything the schedule and the checks need about the source region.
#[derive(Debug, Clone)]
pub struct SourceSetup {
    pub geometry: Geometry,
    pub psi: PsiSamples,
    pub t1: LocalHomeo,
}

struct Node {
    z: CirclePoint,
    depth: usize,
    sum: f64,
}

/// Backward preimage search from `q₀`: `P̃` collects the points of `B[x₀]`
/// reaching `q₀` with average at least `c̄ − η`; `q` is the one closest to
/// `q₀` and `E = [q, q₀]`.
#[allow(clippy::too_many_arguments)]
pub fn build_e_q_q0(
    f: &PlMap,
    phi: &Potential,
    ball: &Arc,
    q0: CirclePoint,
    m0: usize,
    c_bar: f64,
    eta: f64,
    table: Option<&AverageTable>,
    node_cap: usize,
) -> Result<(CirclePoint, usize, Arc)> {
    let target = c_bar - eta;
    let upper = |j: usize| -> f64 {
        match table {
            Some(t) if j <= t.len() => t.get(j).upper(),
            _ => phi.max(),
        }
    };
    let mut stack = vec![Node { z: q0, depth: 0, sum: 0.0 }];
    let mut visited = 0usize;
    let mut best: Option<(f64, usize, CirclePoint)> = None;
    while let Some(node) = stack.pop() {
        visited += 1;
        if visited > node_cap {
            return Err(Error::NotFound(format!("preimage tree of q0 exceeds {node_cap} nodes")));
        }
        if node.depth >= 1 && ball.contains(node.z) && node.sum >= target * node.depth as f64 {
            let d = node.z.dist(q0);
            if d > 1e-12 {
                let better = match best {
                    None => true,
                    Some((bd, bn, _)) => d < bd - 1e-15 || ((d - bd).abs() <= 1e-15 && node.depth < bn),
                };
                if better {
                    best = Some((d, node.depth, node.z));
                }
            }
        }
        if node.depth >= m0 {
            continue;
        }
        let viable = (node.depth + 1..=m0).any(|n| node.sum + (n - node.depth) as f64 * upper(n - node.depth) >= n as f64 * target);
        if !viable {
            continue;
        }
        for w in f.preimages(node.z)? {
            stack.push(Node { z: w, depth: node.depth + 1, sum: node.sum + phi.eval(w) });
        }
    }
    let (_, n_q, q) = best.ok_or(Error::EmptyPreimageSet)?;
    let e = Arc::spanning(q, q0)?;
    Ok((q, n_q, e))
}

/// `I = E ∪ B_δ[q₀]`, an arc since `q₀` is an endpoint of `E`.
pub fn i_arc(q: CirclePoint, q0: CirclePoint, delta: f64) -> Result<Arc> {
    let o = q.offset_to(q0);
    if o > 0.0 {
        Arc::from_lift(q.value(), q.value() + o + delta)
    } else {
        Arc::from_lift(q.value() + o - delta, q.value())
    }
}

fn lift_interval_hits(arc: &Arc, a: f64, b: f64) -> bool {
    // does the lift interval [min(a,b), max(a,b)] meet the closed arc
    let (lo, hi) = arc.lift_bounds();
    let (x, y) = (a.min(b), a.max(b));
    if y - x >= 1.0 {
        return true;
    }
    let shift = (lo - x).div_euclid(1.0) + 1.0;
    let (x, y) = (x + shift, y + shift);
    // x in (lo, lo + 1]
    x <= hi || y >= lo + 1.0
}

/// Source radius: halves `δ` from `cap` until the witness branch is
/// affine and isolated from `I`, and every grid `z ∈ I` off the `q`-component
/// with `f^j(z) ∈ B_δ[q₀]` has `S_j(z)/j < c̄ − η/2`.
#[allow(clippy::too_many_arguments)]
pub fn find_delta(
    f: &PlMap,
    phi: &Potential,
    q: CirclePoint,
    q0: CirclePoint,
    n_q: usize,
    m0: usize,
    grid: usize,
    c_bar: f64,
    eta: f64,
    cap: f64,
) -> Result<f64> {
    let o = q.offset_to(q0).signum();
    let e = Arc::spanning(q, q0)?;
    let branch = local_branch(f, q, n_q, o);
    let resolution = 1.0 / grid as f64;
    let mut delta = cap.min(0.25 * q.dist(q0)).min(0.5 * branch.slope.abs() * branch.extent);
    let mut orbit = Vec::with_capacity(n_q);
    let mut x = q;
    for _ in 1..n_q {
        x = f.eval(x);
        orbit.push(x);
        if e.contains(x) {
            return Err(Error::DegenerateGeometry("the witness orbit revisits E".into()));
        }
    }
    let threshold = c_bar - eta / 2.0;
    while delta >= resolution {
        let i = i_arc(q, q0, delta)?;
        let w = delta / branch.slope.abs();
        let w0 = Arc::from_lift(q.value().min(q.value() + o * w), q.value().max(q.value() + o * w))?;
        // intermediate images of W₀ must avoid I so that N_ret = n_q there
        let isolated = orbit.iter().enumerate().all(|(j, y)| {
            let spread = branch.partial_slopes[j + 1] * w;
            !lift_interval_hits(&i, y.value() - spread, y.value() + spread)
        });
        let ball = Arc::closed(q0, delta)?;
        let separated = isolated
            && i.grid_points(grid).par_iter().all(|&z| {
                if w0.contains(z) {
                    return true;
                }
                let mut y = z;
                let mut sum = 0.0;
                for j in 1..=m0 {
                    sum += phi.eval(y);
                    y = f.eval(y);
                    if ball.contains(y) && sum / j as f64 >= threshold {
                        return false;
                    }
                }
                true
            });
        if separated {
            return Ok(delta);
        }
        delta /= 2.0;
    }
    Err(Error::DeltaCollapse { resolution })
}

/// Samples `ψ = S_{n_q}/n_q` across `W₀ = [q, q + o·w]`.
pub fn sample_psi(f: &PlMap, phi: &Potential, q: CirclePoint, orientation: f64, n_q: usize, width: f64, count: usize) -> PsiSamples {
    let branch = local_branch(f, q, n_q, orientation);
    let lip_psi = phi.lipschitz() * branch.partial_slopes.iter().sum::<f64>() / n_q as f64;
    let h = width / count as f64;
    let values: Vec<f64> = (0..=count)
        .into_par_iter()
        .map(|k| {
            let z = CirclePoint::new(q.value() + orientation * h * k as f64);
            birkhoff_sum(f, phi, z, n_q).average
        })
        .collect();
    PsiSamples { q, orientation, width, values, bar: lip_psi * h / 2.0 }
}

/// Picks `α` satisfying `4m₀(ψ(z_max) − ψ(α)) ≤ |ψ(α) − ψ(q)|`, with
/// `ψ(z_max)` taken at its upper bar and `α` kept off both ends of `W₀`.
///
/// Among the admissible samples connected to the one nearest `z_max`, the
/// farthest one that still meets the inequality with a factor 2 to spare is
/// taken, so that `P(R₁)` is large enough to resolve several halving levels.
pub fn choose_alpha(psi: &PsiSamples, m0: usize, eta: f64) -> Result<Alpha> {
    let v = &psi.values;
    let count = v.len() - 1;
    let mut km = 0;
    for (k, &val) in v.iter().enumerate() {
        if val > v[km] {
            km = k;
        }
    }
    let psi_q = v[0];
    let psi_max_upper = v[km] + psi.bar;
    let k_lo = (count as f64 * 0.05).ceil() as usize;
    let k_hi = count - 1;
    let admissible =
        |k: usize, factor: f64| factor * 4.0 * m0 as f64 * (psi_max_upper - v[k]) <= (v[k] - psi_q).abs() && v[k] >= psi_q;
    let nearest = (k_lo..=k_hi)
        .filter(|&k| admissible(k, 2.0))
        .min_by_key(|&k| (k.abs_diff(km), std::cmp::Reverse(k)));
    let index = match nearest {
        Some(k0) => {
            let (mut lo, mut hi) = (k0, k0);
            while lo > k_lo && admissible(lo - 1, 2.0) {
                lo -= 1;
            }
            while hi < k_hi && admissible(hi + 1, 2.0) {
                hi += 1;
            }
            if lo.abs_diff(km) >= hi.abs_diff(km) {
                lo
            } else {
                hi
            }
        }
        None if psi_max_upper - psi_q <= eta => km.clamp(k_lo, k_hi),
        None => return Err(Error::NoValidAlpha),
    };
    Ok(Alpha {
        index,
        alpha: psi.point(index),
        z_max: psi.point(km),
        psi_alpha: v[index],
        psi_q,
        psi_max: v[km],
        psi_max_upper,
    })
}

/// `T₁`: supported on `V(L)`, the `δ₃`-tube around the segment from `α` to
/// `f₂(α)`, sending `f₂(α)` to `α`. `δ₃` is half the room left inside `I`,
/// capped by `delta3_cap`.
pub fn build_t1(f2_alpha: CirclePoint, alpha: CirclePoint, i: &Arc, delta3_cap: f64) -> Result<LocalHomeo> {
    let (ilo, ihi) = i.lift_bounds();
    let (a, b) = (i.chart(alpha), i.chart(f2_alpha));
    let (lo, hi) = (a.min(b), a.max(b));
    let room = (lo - ilo).min(ihi - hi);
    let delta3 = (0.5 * room).min(delta3_cap);
    if !(delta3 > 1e-15 * (1.0 + hi.abs())) || hi - lo + 2.0 * delta3 >= 1.0 {
        return Err(Error::SupportOverflow);
    }
    let support = Arc::from_lift(lo - delta3, hi + delta3)?;
    if a == b {
        return Ok(LocalHomeo::identity(support));
    }
    LocalHomeo::moving(support, f2_alpha, alpha)
}

/// Runs the whole Case IIb geometry: `q`, `E`, `δ`, `W₀`, `α`, `T₁` and `W_α`.
#[allow(clippy::too_many_arguments)]
pub fn source_setup(
    f: &PlMap,
    phi: &Potential,
    ball: &Arc,
    q0: CirclePoint,
    m0: usize,
    c_bar: f64,
    eta: f64,
    grid: usize,
    delta_cap: f64,
    table: Option<&AverageTable>,
) -> Result<SourceSetup> {
    let (q, n_q, e) = build_e_q_q0(f, phi, ball, q0, m0, c_bar, eta, table, PREIMAGE_NODE_CAP)?;
    let delta = find_delta(f, phi, q, q0, n_q, m0, grid, c_bar, eta, delta_cap)?;
    let o = q.offset_to(q0).signum();
    let branch = local_branch(f, q, n_q, o);
    let width = delta / branch.slope.abs();
    if !(width > 1e-12) {
        return Err(Error::DegenerateGeometry(format!("W0 width {width} below floating resolution")));
    }
    let i = i_arc(q, q0, delta)?;
    let w0 = Arc::from_lift(q.value().min(q.value() + o * width), q.value().max(q.value() + o * width))?;
    let psi = sample_psi(f, phi, q, o, n_q, width, PSI_SAMPLES);
    let alpha = choose_alpha(&psi, m0, eta)?;
    let f2_alpha = f.iterate(alpha.alpha, n_q);
    let t1 = build_t1(f2_alpha, alpha.alpha, &i, f64::INFINITY)?;
    let v_l = t1.support;
    let delta3 = (v_l.length() - alpha.alpha.dist(f2_alpha)) / 2.0;
    // W_α: the run of samples around α whose return lands in V(L)
    let inside: Vec<bool> = (0..psi.values.len()).map(|k| v_l.contains(f.iterate(psi.point(k), n_q))).collect();
    let (mut lo, mut hi) = (alpha.index, alpha.index);
    while lo > 0 && inside[lo - 1] {
        lo -= 1;
    }
    while hi + 1 < inside.len() && inside[hi + 1] {
        hi += 1;
    }
    let h = psi.step();
    let t_lo = (lo as f64 - 1.0).max(0.0) * h;
    let t_hi = ((hi + 1) as f64).min((psi.values.len() - 1) as f64) * h;
    let (a, b) = (q.value() + o * t_lo, q.value() + o * t_hi);
    let w_alpha = Arc::from_lift(a.min(b), a.max(b))?;
    let geometry = Geometry {
        q0,
        q,
        n_q,
        orientation: o,
        e,
        delta,
        i_arc: i,
        w0,
        branch_slope: branch.slope,
        m0,
        c_bar,
        z_max: alpha.z_max,
        alpha: alpha.alpha,
        f2_alpha,
        psi_q: alpha.psi_q,
        psi_alpha: alpha.psi_alpha,
        psi_max: alpha.psi_max,
        psi_max_upper: alpha.psi_max_upper,
        psi_bar: psi.bar,
        delta3,
        v_l,
        w_alpha,
    };
    Ok(SourceSetup { geometry, psi, t1 })
}
