//! The end-to-end certificate: closeness, periodicity, maximality of the
//! orbit against both bounds, and the structural check suites.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circle::{CirclePoint, PlMap, Potential};
use crate::config::{read_json, write_json};
use crate::error::{Error, Result};
use crate::measure::{best_periodic_orbit_capped, normalize, random_tail_average, ulam_upper_bound, RandomOrbits};
use crate::perturb::{lemma_checks, orbit_residual, CaseTag, LemmaChecks, PerturbationPlan};

/// Settings of a certification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CertifyOptions {
    pub epsilon: f64,
    pub tol: f64,
    pub eta: f64,
    pub bins: usize,
    pub grid: usize,
    pub max_period: usize,
    pub random: RandomOrbits,
    /// Sample count of the check suites.
    pub samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            epsilon: 0.1,
            tol: 1e-3,
            eta: 1e-6,
            bins: 1 << 12,
            grid: 1 << 14,
            max_period: 10,
            random: RandomOrbits::default(),
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    pub epsilon: f64,
    pub tol: f64,
    pub bins: usize,
    pub seed: u64,
    pub case: CaseTag,
    /// `d(f, f̂)`.
    pub distance: f64,
    pub orbit: Vec<CirclePoint>,
    pub period: usize,
    /// `d(f̂^period(p), p)`.
    pub orbit_residual: f64,
    /// Average of `φ₀` over the orbit.
    pub orbit_average: f64,
    /// Ulam bound for `f̂`; `None` when it could not be computed.
    pub upper_bound: Option<f64>,
    pub upper_bar: f64,
    /// Best of the periodic enumeration and random tails on `f̂`.
    pub lower_bound_oracle: f64,
    pub periodic_best: Option<f64>,
    pub periodic_depth: usize,
    pub random_tail: f64,
    /// Ulam bound for `f`, for context.
    pub original_upper_bound: Option<f64>,
    pub lemma_checks: LemmaChecks,
    /// Failures met while certifying; any entry forces a false verdict.
    pub failures: Vec<String>,
    pub verdict: bool,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// `orbitAverage + tol ≥ upper − bar`.
    pub fn upper_ok(&self) -> bool {
        self.upper_bound.is_some_and(|u| self.orbit_average + self.tol >= u - self.upper_bar)
    }

    /// `orbitAverage + tol ≥ lowerBoundOracle`.
    pub fn lower_ok(&self) -> bool {
        self.orbit_average + self.tol >= self.lower_bound_oracle
    }
}

/// Certifies `f̂` against `f` and the plan. Never fails: problems become
/// entries of `failures` and a false verdict.
pub fn certify(
    f: &PlMap,
    f_hat: &PlMap,
    plan: &PerturbationPlan,
    phi0: &Potential,
    opts: &CertifyOptions,
) -> Certificate {
    let mut failures = Vec::new();
    let distance = f.c0_distance(f_hat);
    let period = plan.period.max(1);
    let mut orbit = Vec::with_capacity(period);
    let mut x = plan.periodic_point;
    let mut sum = 0.0;
    for _ in 0..period {
        orbit.push(x);
        sum += phi0.eval(x);
        x = f_hat.eval(x);
    }
    let orbit_average = sum / period as f64;
    let residual = orbit_residual(f_hat, plan.periodic_point, period);
    if plan.period == 0 {
        failures.push("plan has period 0".into());
    }

    let mut bound = |g: &PlMap, what: &str| match ulam_upper_bound(g, phi0, opts.bins) {
        Ok(b) => Some(b),
        Err(e) => {
            failures.push(format!("{what}: {e}"));
            None
        }
    };
    let upper = bound(f_hat, "upper bound");
    let original = bound(f, "original upper bound");
    let (periodic, depth) = best_periodic_orbit_capped(f_hat, phi0, opts.max_period);
    let periodic_best = periodic.map(|(_, avg)| avg);
    let random_tail = random_tail_average(f_hat, phi0, opts.random);
    let lower_bound_oracle = periodic_best.map_or(random_tail, |p| p.max(random_tail));

    let phi = normalize(phi0, plan.beta);
    let checks = lemma_checks(f, f_hat, plan, &phi, opts.grid, opts.samples, opts.eta);

    let mut cert = Certificate {
        epsilon: opts.epsilon,
        tol: opts.tol,
        bins: opts.bins,
        seed: opts.random.seed,
        case: plan.case,
        distance,
        orbit,
        period: plan.period,
        orbit_residual: residual,
        orbit_average,
        upper_bound: upper.as_ref().map(|b| b.value),
        upper_bar: upper.as_ref().map_or(0.0, |b| b.bar),
        lower_bound_oracle,
        periodic_best,
        periodic_depth: depth,
        random_tail,
        original_upper_bound: original.map(|b| b.value),
        lemma_checks: checks,
        failures,
        verdict: false,
    };
    cert.verdict = cert.failures.is_empty()
        && cert.distance < cert.epsilon
        && cert.upper_ok()
        && cert.lower_ok()
        && cert.lemma_checks.all_passed();
    cert
}

/// Trajectories written next to the certificate.
const TRAJECTORIES: usize = 4;
const TRAJECTORY_LEN: usize = 500;

/// Writes `certificate.json`, `orbit.csv` and `trajectory-k.csv` into `dir`.
/// CSV columns are `n, x_n, running_average` under `φ₀` and `f̂`; trajectory
/// starting points are drawn from the certificate's seed.
pub fn emit_report(cert: &Certificate, f_hat: &PlMap, phi0: &Potential, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();
    let json = dir.join("certificate.json");
    write_json(&json, cert)?;
    written.push(json);

    let orbit_path = dir.join("orbit.csv");
    write_text(&orbit_path, &trajectory_csv(&cert.orbit, phi0))?;
    written.push(orbit_path);

    let mut rng = ChaCha8Rng::seed_from_u64(cert.seed);
    for k in 0..TRAJECTORIES {
        let mut x = CirclePoint::new(rng.gen::<f64>());
        let points: Vec<CirclePoint> = (0..TRAJECTORY_LEN)
            .map(|_| {
                let here = x;
                x = f_hat.eval(x);
                here
            })
            .collect();
        let path = dir.join(format!("trajectory-{k}.csv"));
        write_text(&path, &trajectory_csv(&points, phi0))?;
        written.push(path);
    }
    Ok(written)
}

fn trajectory_csv(points: &[CirclePoint], phi0: &Potential) -> String {
    let mut out = String::from("n,x_n,running_average\n");
    let mut sum = 0.0;
    for (n, x) in points.iter().enumerate() {
        sum += phi0.eval(*x);
        writeln!(out, "{n},{},{}", x.value(), sum / (n + 1) as f64).expect("string write");
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::{Arc, LocalHomeo};

    fn quick() -> CertifyOptions {
        CertifyOptions {
            bins: 1024,
            random: RandomOrbits { count: 200, length: 200, seed: 3 },
            samples: 100,
            ..CertifyOptions::default()
        }
    }

    #[test]
    fn maximizing_fixed_point_needs_no_plan() {
        let f = PlMap::doubling();
        let phi0 = Potential::cosine(4096, 1.0);
        let plan = PerturbationPlan::trivial(CaseTag::CaseI, CirclePoint::new(0.0), 1);
        let c = certify(&f, &f, &plan, &phi0, &quick());
        assert_eq!(c.distance, 0.0);
        assert_eq!(c.orbit, vec![CirclePoint::new(0.0)]);
        assert_eq!(c.orbit_average, 1.0);
        assert_eq!(c.periodic_best, Some(1.0));
        assert!(c.verdict, "{}", c.to_json());
    }

    #[test]
    fn suboptimal_orbit_is_rejected() {
        let f = PlMap::doubling();
        let phi0 = Potential::cosine(4096, 1.0);
        let plan = PerturbationPlan::trivial(CaseTag::CaseI, CirclePoint::new(1.0 / 3.0), 2);
        let c = certify(&f, &f, &plan, &phi0, &quick());
        assert!((c.orbit_average + 0.5).abs() < 1e-6);
        assert!(!c.upper_ok() && !c.lower_ok() && !c.verdict);
    }

    #[test]
    fn broken_periodicity_is_counted() {
        let f = PlMap::doubling();
        let phi0 = Potential::cosine(4096, 1.0);
        let plan = PerturbationPlan::trivial(CaseTag::CaseI, CirclePoint::new(0.1), 1);
        let c = certify(&f, &f, &plan, &phi0, &quick());
        let p = c.lemma_checks.get("periodicity").unwrap();
        assert_eq!((p.checked, p.violations), (1, 1));
        assert!(!c.verdict);
        let back: Certificate = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back.lemma_checks.get("periodicity").unwrap().violations, 1);
    }

    #[test]
    fn far_perturbation_fails_closeness() {
        let f = PlMap::rotation(0.5);
        let phi0 = Potential::cosine(256, 1.0);
        let t = LocalHomeo::moving(Arc::closed(0.5, 0.2).unwrap(), CirclePoint::new(0.5), CirclePoint::new(0.35)).unwrap();
        let mut plan = PerturbationPlan::trivial(CaseTag::CaseI, CirclePoint::new(0.0), 1);
        plan.support_arcs.push(t.support);
        plan.steps.push(t);
        let g = crate::perturb::compose_unchecked(&f, &plan);
        let c = certify(&f, &g, &plan, &phi0, &CertifyOptions { epsilon: 0.1, ..quick() });
        assert!((c.distance - 0.15).abs() < 1e-12);
        assert!(!c.verdict);
    }

    #[test]
    fn report_round_trips() {
        let f = PlMap::rotation(0.5);
        let phi0 = Potential::cosine(256, 1.0);
        let plan = PerturbationPlan::trivial(CaseTag::CaseI, CirclePoint::new(0.0), 2);
        let c = certify(&f, &f, &plan, &phi0, &quick());
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&c, &f, &phi0, dir.path()).unwrap();
        assert_eq!(files.len(), 2 + TRAJECTORIES);
        assert_eq!(Certificate::load(&files[0]).unwrap(), c);
        let orbit = std::fs::read_to_string(&files[1]).unwrap();
        let rows: Vec<&str> = orbit.lines().collect();
        assert_eq!(rows[0], "n,x_n,running_average");
        assert_eq!(rows.len(), 1 + 2);
        assert_eq!(rows[2], "1,0.5,0");
    }

    #[test]
    fn io_failure_names_the_path() {
        let c = certify(
            &PlMap::doubling(),
            &PlMap::doubling(),
            &PerturbationPlan::trivial(CaseTag::CaseI, CirclePoint::new(0.0), 1),
            &Potential::cosine(256, 1.0),
            &quick(),
        );
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        match emit_report(&c, &PlMap::doubling(), &Potential::cosine(256, 1.0), &blocker.join("sub")) {
            Err(Error::Io { context, .. }) => assert!(context.contains("sub")),
            other => panic!("{other:?}"),
        }
    }
}
