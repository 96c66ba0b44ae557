//! Bounds on `sup ∫φ dμ` over invariant measures: the Ulam-graph upper bound,
//! periodic-orbit and random-orbit lower bounds, and normalization.

mod periodic;
mod ulam;

pub use periodic::{periodic_orbits, PeriodicOrbit, DEFAULT_BRANCH_CAP};
pub use ulam::{ulam_upper_bound, write_transition_csv, UlamBound, UlamGraph};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{CirclePoint, PlMap, Potential};
use crate::error::Result;

/// Upper and lower bounds on the maximal ergodic average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizingBound {
    pub upper: f64,
    pub upper_bar: f64,
    pub lower: f64,
    pub witness_orbit: Option<Vec<CirclePoint>>,
    /// Best tail average over random orbits, a secondary lower bound.
    pub random_tail: f64,
}

/// Parameters of the random-orbit lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomOrbits {
    pub count: usize,
    pub length: usize,
    pub seed: u64,
}

impl Default for RandomOrbits {
    fn default() -> Self {
        RandomOrbits { count: 10_000, length: 1_000, seed: 7 }
    }
}

/// Best average over the second half of `count` random orbits of `length`
/// points. Starting points come from one seeded stream, so the result does
/// not depend on the thread count.
pub fn random_tail_average(f: &PlMap, phi: &Potential, orbits: RandomOrbits) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(orbits.seed);
    let starts: Vec<f64> = (0..orbits.count).map(|_| rng.gen::<f64>()).collect();
    let burn = orbits.length / 2;
    let tails: Vec<f64> = starts
        .par_iter()
        .map(|&x0| {
            let mut x = CirclePoint::new(x0);
            let mut sum = 0.0;
            for i in 0..orbits.length {
                if i >= burn {
                    sum += phi.eval(x);
                }
                x = f.eval(x);
            }
            sum / (orbits.length - burn).max(1) as f64
        })
        .collect();
    tails.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Best periodic-orbit average with period at most `max_period`.
pub fn best_periodic_orbit(f: &PlMap, phi: &Potential, max_period: usize) -> Result<Option<(PeriodicOrbit, f64)>> {
    let orbits = periodic_orbits(f, max_period, DEFAULT_BRANCH_CAP)?;
    Ok(orbits
        .into_iter()
        .map(|o| {
            let avg = o.average(phi);
            (o, avg)
        })
        .fold(None, |best: Option<(PeriodicOrbit, f64)>, (o, avg)| match best {
            Some((_, b)) if b >= avg => best,
            _ => Some((o, avg)),
        }))
}

/// [`best_periodic_orbit`] that backs off the period whenever branch
/// enumeration explodes. Returns the period actually reached.
pub fn best_periodic_orbit_capped(f: &PlMap, phi: &Potential, max_period: usize) -> (Option<(PeriodicOrbit, f64)>, usize) {
    let mut p = max_period;
    while p >= 1 {
        if let Ok(best) = best_periodic_orbit(f, phi, p) {
            return (best, p);
        }
        p -= 1;
    }
    (None, 0)
}

/// Lower bound: the best periodic orbit of period `<= max_period`, with the
/// random-orbit tail recorded alongside.
pub fn best_periodic_average(
    f: &PlMap,
    phi: &Potential,
    max_period: usize,
    random: RandomOrbits,
) -> Result<(f64, Option<PeriodicOrbit>, f64)> {
    let best = best_periodic_orbit(f, phi, max_period)?;
    let tail = random_tail_average(f, phi, random);
    Ok(match best {
        Some((orbit, avg)) => (avg, Some(orbit), tail),
        None => (tail, None, tail),
    })
}

/// Both bounds at once.
pub fn maximizing_bound(
    f: &PlMap,
    phi: &Potential,
    bins: usize,
    max_period: usize,
    random: RandomOrbits,
) -> Result<MaximizingBound> {
    let up = ulam_upper_bound(f, phi, bins)?;
    let (lower, orbit, tail) = best_periodic_average(f, phi, max_period, random)?;
    Ok(MaximizingBound {
        upper: up.value,
        upper_bar: up.bar,
        lower: lower.max(tail),
        witness_orbit: orbit.map(|o| o.points),
        random_tail: tail,
    })
}

/// `φ = φ₀ - β`.
pub fn normalize(phi0: &Potential, beta: f64) -> Potential {
    phi0.shifted(beta)
}
