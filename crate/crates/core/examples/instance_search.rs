//! Brute-force scan of a small family of degree-2 PL maps and cosine
//! potentials, reporting the case reached at each `ε` and the verdict of the
//! certificate. Used to pick the shipped reference instances.
//!
//! `cargo run --release --example instance_search`

use std::time::Instant;

use ergoclose::certify::{certify, CertifyOptions};
use ergoclose::config::{MapSpec, NamedMap, NamedPotential, PotentialSpec};
use ergoclose::perturb::{run_pipeline, PipelineOptions};

fn main() {
    let maps = [
        MapSpec::Named(NamedMap::Doubling),
        MapSpec::Slopes { breakpoints: vec![0.0, 0.25, 1.0], v0: 0.0, slopes: vec![4.0, 4.0 / 3.0], degree: 2 },
        MapSpec::Slopes { breakpoints: vec![0.0, 0.4, 1.0], v0: 0.1, slopes: vec![3.0, 4.0 / 3.0], degree: 2 },
    ];
    let potentials: Vec<PotentialSpec> = [1.0, -1.0]
        .into_iter()
        .flat_map(|amplitude| {
            [0.0, 0.1, 0.25, 0.4].map(|phase| PotentialSpec::cosine(1 << 14, amplitude, phase))
        })
        .collect();
    for (mi, m) in maps.iter().enumerate() {
        let f = m.build().expect("family map");
        for p in &potentials {
            let phi0 = p.build().expect("family potential");
            let PotentialSpec::Named(NamedPotential::Cosine { amplitude, phase, .. }) = p else { unreachable!() };
            let mut line = format!("map {mi} amp {amplitude:+} phase {phase}:");
            for eps in [0.2, 0.1, 0.05] {
                let t = Instant::now();
                let opts = PipelineOptions { epsilon: eps, ..PipelineOptions::default() };
                match run_pipeline(&f, &phi0, &opts) {
                    Ok(out) => {
                        let c = certify(&f, &out.f_hat, &out.plan, &phi0, &CertifyOptions { epsilon: eps, ..CertifyOptions::default() });
                        let sched = out.plan.schedule.is_some();
                        line += &format!(
                            " [{eps}: {:?}{} per {} d {:.4} v {} {:.1}s]",
                            out.plan.case,
                            if sched { "+T2" } else { "" },
                            out.plan.period,
                            c.distance,
                            c.verdict,
                            t.elapsed().as_secs_f64()
                        );
                    }
                    Err(e) => line += &format!(" [{eps}: error {e}]"),
                }
            }
            println!("{line}");
        }
    }
}
