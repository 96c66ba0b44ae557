use serde::{Deserialize, Serialize};

use super::PlMap;
use crate::error::{Error, Result};

/// Pieces with `|slope|` below this are treated as plateaus and tilted.
pub const MIN_ABS_SLOPE: f64 = 1e-3;

/// A circle endomorphism sampled on the grid `i / n`, `i = 0..=n`, as lift
/// values (so the last sample is the first plus the degree), together with a
/// declared Lipschitz modulus of the lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MapSamples {
    pub lift_samples: Vec<f64>,
    pub modulus: f64,
}

impl MapSamples {
    pub fn from_fn(n: usize, modulus: f64, lift: impl Fn(f64) -> f64) -> Self {
        MapSamples {
            lift_samples: (0..=n).map(|i| lift(i as f64 / n as f64)).collect(),
            modulus,
        }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.lift_samples.len() - 1) as f64
    }
}

/// Piecewise-linear approximation with no constant piece.
///
/// The sampled lift is interpolated, collinear pieces are merged, and every
/// maximal run of near-flat pieces `[a, b]` is replaced by a tent through
/// `(a, v_a)`, `((a+b)/2, (v_a+v_b)/2 + ε/4)`, `(b, v_b)`. The interpolation
/// error of an `L`-Lipschitz lift is at most `L h / 2`, which must stay below
/// `ε / 2`.
pub fn pl_approximate(samples: &MapSamples, epsilon: f64) -> Result<PlMap> {
    let v = &samples.lift_samples;
    if v.len() < 2 {
        return Err(Error::InvalidMap("need at least two lift samples".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = v.len() - 1;
    let h = samples.spacing();
    let wrap = v[n] - v[0];
    let degree = wrap.round();
    if (wrap - degree).abs() > 1e-9 {
        return Err(Error::InvalidMap(format!("lift samples wrap by {wrap}, not an integer")));
    }
    let bound = samples.modulus * h / 2.0;
    if bound >= epsilon / 2.0 {
        return Err(Error::ResolutionTooCoarse { spacing: h, epsilon, bound });
    }
    let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let mut values = v.clone();
    values[n] = values[0] + degree;
    let interp = PlMap::new(t, values, degree as i64)?.simplified(1e-9);

    let bump = epsilon / 4.0;
    let bt = interp.breakpoints();
    let bv = interp.lift_values();
    let flat: Vec<bool> = interp.slopes().iter().map(|s| s.abs() < MIN_ABS_SLOPE).collect();
    let mut out_t = vec![bt[0]];
    let mut out_v = vec![bv[0]];
    let mut i = 0;
    while i < flat.len() {
        if !flat[i] {
            out_t.push(bt[i + 1]);
            out_v.push(bv[i + 1]);
            i += 1;
            continue;
        }
        let start = i;
        while i < flat.len() && flat[i] {
            i += 1;
        }
        let (a, b) = (bt[start], bt[i]);
        let (va, vb) = (bv[start], bv[i]);
        if bump <= MIN_ABS_SLOPE * (b - a) {
            return Err(Error::ResolutionTooCoarse { spacing: h, epsilon, bound: MIN_ABS_SLOPE * (b - a) });
        }
        out_t.push((a + b) / 2.0);
        out_v.push((va + vb) / 2.0 + bump);
        out_t.push(b);
        out_v.push(vb);
    }
    let g = PlMap::new(out_t, out_v, degree as i64)?;
    debug_assert!(g.has_finite_preimages());
    let sample_dev = (0..=n)
        .map(|i| {
            let d = g.lift(i as f64 / n as f64) - v[i];
            (d - d.round()).abs()
        })
        .fold(0.0, f64::max);
    if sample_dev + bound >= epsilon {
        return Err(Error::ResolutionTooCoarse { spacing: h, epsilon, bound: sample_dev + bound });
    }
    Ok(g)
}
