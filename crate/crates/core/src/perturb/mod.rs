//! The closing construction: case split, the single-move perturbations of
//! Case I and Case IIa, and the source construction of Case IIb.

mod assemble;
mod case;
mod checks;
mod geometry;
mod pipeline;
mod schedule;

pub use assemble::{assemble, compose_unchecked, orbit_residual};
pub use case::{case_split, decompose_returns, perturb_case_a, perturb_case_one, Block, CaseParams};
pub use checks::{lemma_checks, CheckOutcome, LemmaChecks};
pub use geometry::{build_e_q_q0, build_t1, choose_alpha, find_delta, i_arc, local_branch, sample_psi, source_setup, Alpha, Geometry, LocalBranch, PsiSamples, SourceSetup};
pub use pipeline::{perturb_case_b, run_pipeline, PipelineOptions, PipelineOutput};
pub use schedule::{build_t2, lambda_schedule, AlphaSchedule};

use serde::{Deserialize, Serialize};

use crate::birkhoff::CBar;
use crate::circle::{Arc, CirclePoint, LocalHomeo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    CaseI,
    CaseIIa,
    CaseIIb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseReport {
    pub tag: CaseTag,
    /// Support proxy `x` and the radius of the working ball around it.
    pub x: CirclePoint,
    pub radius: f64,
    pub x0: CirclePoint,
    /// `n₀` in Case II, the first return `n₁` in Case I.
    pub n0: usize,
    /// `S_{n₀}φ(x₀)`; in Case I the certified residual of the closing block.
    pub sum: f64,
    pub a0: Option<f64>,
    pub m0: Option<usize>,
    pub c_bar: Option<CBar>,
    /// Case IIa: the closing witness. Case IIb: filled in by the geometry.
    pub q: Option<CirclePoint>,
    /// Image of the witness; on the boundary of `B[x₀]` in Case IIb.
    pub q0: Option<CirclePoint>,
    pub n_q: Option<usize>,
    /// Case IIb: the boundary-hitting witness `z₁` and its length.
    pub z1: Option<CirclePoint>,
    pub n_z1: Option<usize>,
}

/// The recipe turning `f` into `f̂`: homeomorphisms applied after `f`, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerturbationPlan {
    pub case: CaseTag,
    pub steps: Vec<LocalHomeo>,
    pub periodic_point: CirclePoint,
    pub period: usize,
    pub support_arcs: Vec<Arc>,
    pub schedule: Option<AlphaSchedule>,
    pub report: Option<CaseReport>,
    pub geometry: Option<Geometry>,
    /// `β` with `φ = φ₀ − β` the potential the plan was built for.
    #[serde(default)]
    pub beta: f64,
}

impl PerturbationPlan {
    /// The plan that leaves `f` alone and certifies the orbit of `point`.
    pub fn trivial(case: CaseTag, point: CirclePoint, period: usize) -> Self {
        PerturbationPlan {
            case,
            steps: Vec::new(),
            periodic_point: point,
            period,
            support_arcs: Vec::new(),
            schedule: None,
            report: None,
            geometry: None,
            beta: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Config(format!("plan JSON: {e}")))
    }
}
