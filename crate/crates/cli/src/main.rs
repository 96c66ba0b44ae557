use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ergoclose::certify::{certify, emit_report, Certificate, CertifyOptions};
use ergoclose::config::{MapSpec, RunConfig};
use ergoclose::measure::{best_periodic_orbit_capped, random_tail_average, ulam_upper_bound};
use ergoclose::perturb::{assemble, compose_unchecked, run_pipeline, PerturbationPlan, PipelineOptions};
use ergoclose::{CirclePoint, Error, PlMap, Potential};

/// Periodic maximizing measures for PL circle maps by small C0 perturbation.
#[derive(Parser, Debug)]
#[command(name = "ergoclose", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    bins: Option<usize>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Replace the map by a PL map with finite preimages; writes map.json.
    Approximate,
    /// Upper and lower bounds on the maximal average; writes bounds.json.
    Maximize,
    /// Build the perturbation; writes plan.json and f_hat.json.
    Perturb,
    /// Certify the plan in the output directory; exit status is the verdict.
    Certify,
    /// Perturb, certify and write the report.
    Pipeline,
    /// The pipeline at ε = 0.2, 0.1, 0.05, one subdirectory each.
    Sweep,
}

enum Failure {
    Config(String),
    Construction(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io { .. } | Error::InvalidMap(_) | Error::InvalidPotential(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Construction(other.to_string()),
        }
    }
}

const SWEEP: [f64; 3] = [0.2, 0.1, 0.05];

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Construction(m)) => {
            eprintln!("construction failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(b) = cli.bins {
        cfg.bins = b;
    }
    if let Some(e) = cli.eps {
        cfg.epsilon = e;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg = load_config(cli)?;
    let (f, phi0) = cfg.instance()?;
    create_dir(&cfg.out_dir)?;
    match cli.command {
        Command::Approximate => approximate(&cfg, &f),
        Command::Maximize => maximize(&cfg, &f, &phi0),
        Command::Perturb => perturb(&cfg, &f, &phi0, &cfg.out_dir).map(|_| true),
        Command::Certify => certify_stored(&cfg, &f, &phi0),
        Command::Pipeline => pipeline(&cfg, &f, &phi0, &cfg.out_dir),
        Command::Sweep => {
            let mut all = true;
            for eps in SWEEP {
                let sub = RunConfig { epsilon: eps, ..cfg.clone() };
                let dir = cfg.out_dir.join(format!("eps-{eps}"));
                create_dir(&dir)?;
                all &= pipeline(&sub, &f, &phi0, &dir)?;
            }
            Ok(all)
        }
    }
}

fn approximate(cfg: &RunConfig, f: &PlMap) -> Result<bool, Failure> {
    if let MapSpec::Sampled { samples, epsilon } = MapSpec::load(&cfg.map)? {
        let n = samples.lift_samples.len() - 1;
        let gap = samples
            .lift_samples
            .iter()
            .enumerate()
            .map(|(i, v)| (f.lift(i as f64 / n as f64) - v).abs())
            .fold(0.0, f64::max);
        println!("approximated {} samples with {} pieces; sample deviation {gap:.3e} < {epsilon}", n + 1, f.pieces());
    }
    write(&cfg.out_dir.join("map.json"), &MapSpec::from_map(f))?;
    Ok(true)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Bounds {
    upper: f64,
    upper_bar: f64,
    bins: usize,
    periodic_best: Option<f64>,
    periodic_orbit: Option<Vec<CirclePoint>>,
    periodic_depth: usize,
    random_tail: f64,
    seed: u64,
}

fn maximize(cfg: &RunConfig, f: &PlMap, phi0: &Potential) -> Result<bool, Failure> {
    let opts = cfg.pipeline_options();
    let up = ulam_upper_bound(f, phi0, cfg.bins)?;
    let (best, depth) = best_periodic_orbit_capped(f, phi0, opts.max_period);
    let tail = random_tail_average(f, phi0, opts.random);
    let bounds = Bounds {
        upper: up.value,
        upper_bar: up.bar,
        bins: cfg.bins,
        periodic_best: best.as_ref().map(|b| b.1),
        periodic_orbit: best.map(|b| b.0.points),
        periodic_depth: depth,
        random_tail: tail,
        seed: cfg.seed,
    };
    println!("upper bound {:.6} (bar {:.3e}, {} bins)", bounds.upper, bounds.upper_bar, bounds.bins);
    match bounds.periodic_best {
        Some(b) => println!("best periodic average {b:.6} (periods up to {depth})"),
        None => println!("no periodic orbit found up to period {depth}"),
    }
    println!("best random tail {tail:.6} (seed {})", cfg.seed);
    write(&cfg.out_dir.join("bounds.json"), &bounds)?;
    Ok(true)
}

fn perturb(cfg: &RunConfig, f: &PlMap, phi0: &Potential, dir: &Path) -> Result<(PlMap, PerturbationPlan), Failure> {
    let opts: PipelineOptions = cfg.pipeline_options();
    let out = run_pipeline(f, phi0, &opts)?;
    println!(
        "{:?}: periodic point {} of period {}, d(f, f_hat) = {:.4e}, eps used {}",
        out.plan.case,
        out.plan.periodic_point.value(),
        out.plan.period,
        f.c0_distance(&out.f_hat),
        out.epsilon_used
    );
    write(&dir.join("plan.json"), &out.plan)?;
    write(&dir.join("f_hat.json"), &MapSpec::from_map(&out.f_hat))?;
    Ok((out.f_hat, out.plan))
}

fn certify_with(cfg: &RunConfig, f: &PlMap, f_hat: &PlMap, plan: &PerturbationPlan, phi0: &Potential, dir: &Path) -> Result<bool, Failure> {
    let opts = certify_options(cfg);
    let cert = certify(f, f_hat, plan, phi0, &opts);
    emit_report(&cert, f_hat, phi0, dir)?;
    summarize(&cert);
    Ok(cert.verdict)
}

fn certify_stored(cfg: &RunConfig, f: &PlMap, phi0: &Potential) -> Result<bool, Failure> {
    let path = cfg.out_dir.join("plan.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let plan = PerturbationPlan::from_json(&text)?;
    // a plan that no longer closes up is still certified, and fails there
    let f_hat = assemble(f, &plan).unwrap_or_else(|_| compose_unchecked(f, &plan));
    certify_with(cfg, f, &f_hat, &plan, phi0, &cfg.out_dir)
}

fn pipeline(cfg: &RunConfig, f: &PlMap, phi0: &Potential, dir: &Path) -> Result<bool, Failure> {
    let (f_hat, plan) = perturb(cfg, f, phi0, dir)?;
    certify_with(cfg, f, &f_hat, &plan, phi0, dir)
}

fn certify_options(cfg: &RunConfig) -> CertifyOptions {
    let p = cfg.pipeline_options();
    CertifyOptions {
        epsilon: cfg.epsilon,
        tol: cfg.tol,
        eta: cfg.eta,
        bins: cfg.bins,
        grid: cfg.grid,
        max_period: p.max_period,
        random: p.random,
        ..CertifyOptions::default()
    }
}

fn summarize(c: &Certificate) {
    println!(
        "distance {:.4e} < {}: {}; orbit average {:.6}; upper {} (bar {:.3e}); lower oracle {:.6}",
        c.distance,
        c.epsilon,
        c.distance < c.epsilon,
        c.orbit_average,
        c.upper_bound.map_or("n/a".to_string(), |u| format!("{u:.6}")),
        c.upper_bar,
        c.lower_bound_oracle
    );
    for (name, o) in &c.lemma_checks.0 {
        println!("  {name}: {}/{} violations", o.violations, o.checked);
    }
    for m in &c.failures {
        println!("  failure: {m}");
    }
    println!("verdict {}", c.verdict);
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))
}

fn write<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::Construction(format!("{}: {e}", path.display())))
}
