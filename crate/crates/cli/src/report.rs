//! The report document. Every struct rejects unknown fields so that reading a
//! report back doubles as schema validation.

use ergo_core::chain_bounds::RateBounds;
use ergo_core::montecarlo::{DiffusionHitEstimate, HitEstimate};
use ergo_core::numerics::Tolerance;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub model: ModelEcho,
    pub bounds: Option<RateBounds>,
    /// Set when the bound computation returned a verdict instead of numbers.
    pub bounds_error: Option<String>,
    pub verification: Option<Verification>,
    pub montecarlo: Option<MonteCarlo>,
    pub provenance: RunInfo,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn failed_verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| v.status == Status::Fail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEcho {
    pub family: String,
    /// SHA-256 of the canonical JSON of the parsed parameters.
    pub params_digest: String,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub tool_version: String,
    pub tolerance: Tolerance,
    pub seed: Option<u64>,
    pub streams: Option<usize>,
    pub trials: Option<usize>,
    pub truncation: Option<usize>,
    pub mesh: Option<f64>,
    pub length: Option<f64>,
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Warn,
    Skipped,
}

/// One property check. `margin` is signed: positive means the property holds
/// with that much room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub margin: Option<f64>,
    pub detail: Option<String>,
}

impl Verdict {
    /// `value <= reference + slack`.
    pub fn at_most(name: &str, value: f64, reference: f64, slack: f64) -> Self {
        let margin = reference + slack - value;
        Verdict {
            name: name.into(),
            status: if margin >= 0.0 { Status::Pass } else { Status::Fail },
            value: Some(value),
            reference: Some(reference),
            margin: Some(margin),
            detail: None,
        }
    }

    pub fn flag(name: &str, status: Status, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            status,
            value: None,
            reference: None,
            margin: None,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// Turns a failure into a warning (diagnostics that do not invalidate the run).
    pub fn soft(mut self) -> Self {
        if self.status == Status::Fail {
            self.status = Status::Warn;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verification {
    pub states: usize,
    pub mesh: Option<f64>,
    pub length: Option<f64>,
    pub gap: GapResult,
    pub kappa_empirical: Option<KappaResult>,
    pub hitting: Option<HittingResult>,
    pub main_lemma: Vec<LemmaResult>,
    /// Sidecar CSV with the decay curve, when written.
    pub decay_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapResult {
    pub value: f64,
    pub method: String,
    pub exact: bool,
    /// Gap after doubling the states or halving the mesh.
    pub refined: f64,
    pub refined_states: usize,
    pub cauchy_delta: f64,
    pub cauchy_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaResult {
    pub rate: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingResult {
    pub target: Vec<usize>,
    /// `max_x E_x tau_H^n` for `n = 1..=4`.
    pub max_moments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaResult {
    pub t: f64,
    pub violations: usize,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    pub start: f64,
    pub target: String,
    pub chain: Option<HitEstimate>,
    pub diffusion: Option<DiffusionHitEstimate>,
    /// Linear-solve value on the truncated or discretized generator.
    pub reference: Option<f64>,
}
