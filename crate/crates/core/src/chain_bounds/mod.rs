//! Series-based rate bounds for discrete chains, plus the general rules that
//! turn hitting-time moments into convergence rates.

pub mod birth_death;
pub mod mc1;
pub mod single_death;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use birth_death::{
    bd_delta, bd_entrance_boundary, bd_hitting_moment, bd_mu, bd_rate_bounds, bd_s_profile, bd_s_summand,
    bd_step_upper, DeltaScan, EntranceVerdict, SProfile,
};
pub use mc1::{mc1_bound, Mc1Bound};
pub use single_death::{sd_g, sd_hitting_bound, sd_rate_bounds, sd_s, GMemo};
pub use tree::{tree_bounds, tree_m, tree_ray_m, tree_summary, HittingSet, TreeSummary};

/// Where a bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// `(4 delta)^-1` from the Hardy-type constant `delta`.
    HardyDelta,
    /// `delta^-1`, an upper bound on the gap of the chain killed at 0.
    HardyDeltaDirichlet,
    /// Inverse of `min_i max{S_i, Sbar_i}` (two-sided hitting profile).
    HittingProfile,
    /// `1/S` with `S` the uniform mean hitting time of the origin.
    UniformHitting,
    /// Rayleigh quotient of a step test function.
    StepRayleigh,
    /// `min{lambda, 1/M_H}` combination rule.
    Combination,
    /// `sup_x (sup_i E_i tau_x)^-1` on a finite reversible chain.
    PointHitting,
    /// Path sums of subtree weights on a tree.
    TreePathSum,
    /// Integral bound for a one-dimensional diffusion.
    DiffusionDelta,
    /// Bound for a time-changed stable process via its Green function.
    GreenIntegral,
    /// Hitting-moment majorant for a stable-driven SDE.
    StableLyapunov,
    /// Supplied by the caller.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Which field the bound applies to, e.g. `"lambda1_lower"`.
    pub bound: String,
    pub source: BoundSource,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Everything known about `kappa` and `lambda1` for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RateBounds {
    pub kappa_lower: f64,
    /// `kappa = lambda1` has been certified (hitting moments of some finite
    /// set fall below the inverse of a proven upper bound on `lambda1`).
    pub kappa_equals_lambda1: bool,
    pub lambda1_lower: Option<f64>,
    pub lambda1_upper: Option<f64>,
    /// Bounds on the gap of the process killed at the origin.
    pub dirichlet_lower: Option<f64>,
    pub dirichlet_upper: Option<f64>,
    /// Uniform mean hitting time of the set `hitting_set`.
    pub m_h: Option<f64>,
    pub hitting_set: Option<String>,
    pub s: Option<f64>,
    pub delta: Option<f64>,
    pub provenance: Vec<Provenance>,
    pub notes: Vec<String>,
}

impl RateBounds {
    pub(crate) fn record(&mut self, bound: &str, source: BoundSource, value: f64, detail: Option<String>) {
        self.provenance.push(Provenance {
            bound: bound.to_string(),
            source,
            value,
            detail,
        });
    }

    /// Checks the ordering invariants between the fields.
    pub fn check(&self) -> Result<()> {
        let slack = |v: f64| 1e-9 * (1.0 + v.abs());
        if let (Some(lo), Some(hi)) = (self.lambda1_lower, self.lambda1_upper) {
            if lo > hi + slack(hi) {
                return Err(Error::invariant(format!("lambda1 lower {lo} exceeds upper {hi}"), "RateBounds"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.dirichlet_lower, self.dirichlet_upper) {
            if lo > hi + slack(hi) {
                return Err(Error::invariant(format!("Dirichlet lower {lo} exceeds upper {hi}"), "RateBounds"));
            }
        }
        if self.kappa_equals_lambda1 {
            if let Some(hi) = self.lambda1_upper {
                if self.kappa_lower > hi + slack(hi) {
                    return Err(Error::invariant(
                        format!("kappa lower {} exceeds lambda1 upper {hi}", self.kappa_lower),
                        "RateBounds",
                    ));
                }
            }
        }
        if !(self.kappa_lower >= 0.0) {
            return Err(Error::invariant(format!("kappa lower {} is negative", self.kappa_lower), "RateBounds"));
        }
        Ok(())
    }
}

/// Uniform hitting-time information for a target set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSummary {
    pub target: String,
    /// `sup_x E_x tau_H`.
    pub moment1: f64,
    /// `(beta, bound on sup_x E_x exp(beta tau_H))`.
    pub exp_moment: Option<(f64, f64)>,
    /// `(t0, bound on sup_x P_x(tau_H > t0))`.
    pub tail: Option<(f64, f64)>,
}

impl HittingSummary {
    pub fn new(target: impl Into<String>, moment1: f64) -> Self {
        HittingSummary {
            target: target.into(),
            moment1,
            exp_moment: None,
            tail: None,
        }
    }

    /// Attaches the exponential-moment and tail bounds for `beta`.
    pub fn with_beta(mut self, beta: f64, t0: f64) -> Result<Self> {
        let b = moment_to_exp(self.moment1, beta)?;
        self.exp_moment = Some((beta, b.bound));
        self.tail = Some((t0, b.tail(t0)));
        Ok(self)
    }
}

/// Which side of `min{lambda, 1/M_H}` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `lambda <= 1/M_H`: then `kappa = lambda`.
    KappaEqualsLambda,
    /// `lambda > 1/M_H`: only `kappa >= 1/M_H` follows.
    HittingLimited,
}

/// `kappa >= min{lambda, 1/M_H}`; a tie counts as [`Regime::KappaEqualsLambda`].
pub fn combine_bounds(lambda: f64, m_h: f64) -> Result<(f64, Regime)> {
    if !(lambda > 0.0) || !(m_h > 0.0) || !lambda.is_finite() || !m_h.is_finite() {
        return Err(Error::invalid(format!(
            "combination needs finite positive inputs (lambda={lambda}, M_H={m_h})"
        )));
    }
    let inv = 1.0 / m_h;
    if lambda <= inv {
        Ok((lambda, Regime::KappaEqualsLambda))
    } else {
        Ok((inv, Regime::HittingLimited))
    }
}

/// Exponential-moment bound `E exp(beta tau) <= 1/(1 - beta M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpMomentBound {
    pub beta: f64,
    pub bound: f64,
}

impl ExpMomentBound {
    /// `P(tau > t) <= exp(-beta t) / (1 - beta M)`.
    pub fn tail(&self, t: f64) -> f64 {
        (-self.beta * t).exp() * self.bound
    }
}

pub fn moment_to_exp(moment1: f64, beta: f64) -> Result<ExpMomentBound> {
    if !(moment1 >= 0.0) || !moment1.is_finite() {
        return Err(Error::invalid(format!("first moment must be finite and >= 0, got {moment1}")));
    }
    if !(beta > 0.0) || beta * moment1 >= 1.0 {
        return Err(Error::invalid(format!(
            "beta must lie in (0, 1/M) = (0, {}), got {beta}",
            1.0 / moment1
        )));
    }
    Ok(ExpMomentBound {
        beta,
        bound: 1.0 / (1.0 - beta * moment1),
    })
}

/// `E tau <= t0 / (1 - delta)` from a tail bound `sup_x P_x(tau > t0) <= delta`.
pub fn tail_to_moment(t0: f64, delta: f64) -> Result<f64> {
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(Error::invalid(format!("t0 must be positive, got {t0}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid(format!("tail probability must lie in [0, 1), got {delta}")));
    }
    Ok(t0 / (1.0 - delta))
}
