use std::path::Path;

use ergoclose::certify::{certify, CertifyOptions};
use ergoclose::config::RunConfig;
use ergoclose::perturb::{assemble, run_pipeline, PerturbationPlan};

fn config(instance: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(instance).join("config.json");
    RunConfig::load(&path).unwrap()
}

fn options(cfg: &RunConfig, scale: usize) -> CertifyOptions {
    CertifyOptions {
        epsilon: cfg.epsilon,
        tol: cfg.tol,
        eta: cfg.eta,
        bins: cfg.bins * scale,
        grid: cfg.grid * scale,
        random: cfg.pipeline_options().random,
        ..CertifyOptions::default()
    }
}

#[test]
fn finer_certification_keeps_true_verdicts() {
    for instance in ["rotation", "case-iia", "case-iib"] {
        let cfg = config(instance);
        let (f, phi0) = cfg.instance().unwrap();
        let out = run_pipeline(&f, &phi0, &cfg.pipeline_options()).unwrap();
        let coarse = certify(&f, &out.f_hat, &out.plan, &phi0, &options(&cfg, 1));
        let fine = certify(&f, &out.f_hat, &out.plan, &phi0, &options(&cfg, 2));
        assert!(coarse.verdict, "{instance}: {}", coarse.to_json());
        assert!(fine.verdict, "{instance}: {}", fine.to_json());
        assert!(fine.upper_bar < coarse.upper_bar);
    }
}

#[test]
fn plans_replay_from_json() {
    for instance in ["case-iia", "case-iib"] {
        let cfg = config(instance);
        let (f, phi0) = cfg.instance().unwrap();
        let out = run_pipeline(&f, &phi0, &cfg.pipeline_options()).unwrap();
        let back = PerturbationPlan::from_json(&out.plan.to_json()).unwrap();
        assert_eq!(back, out.plan);
        assert_eq!(assemble(&f, &back).unwrap(), out.f_hat);
    }
}

#[test]
fn rotation_case_one_is_within_slack_of_the_bound() {
    let cfg = config("rotation");
    let (f, phi0) = cfg.instance().unwrap();
    let out = run_pipeline(&f, &phi0, &cfg.pipeline_options()).unwrap();
    let c = certify(&f, &out.f_hat, &out.plan, &phi0, &options(&cfg, 1));
    // every orbit of the half rotation averages cos over two antipodal points
    assert!(c.orbit_average.abs() < 1e-12);
    assert!(c.distance <= out.plan.steps.iter().map(|t| t.max_displacement()).fold(0.0, f64::max));
    assert!(c.orbit_average >= c.upper_bound.unwrap() - c.upper_bar - cfg.eta);
}
