//! Gautschi's inequality for incomplete Gamma-type tails and the quartic
//! potential example built on it.

use serde::Serialize;

use super::diffusion::{diff_delta, diff_mr};
use crate::model::DiffusionSpec;
use crate::numerics::{gamma_fn, integrate, Tolerance};
use crate::{Error, Result};

/// `C_p = Gamma(1 + 1/p)^{p/(p-1)}`.
pub fn gautschi_constant(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("Gautschi's bound needs p > 1, got {p}")));
    }
    Ok(gamma_fn(1.0 + 1.0 / p)?.powf(p / (p - 1.0)))
}

/// `C_p [(x^p + 1/C_p)^{1/p} - x]`, an upper bound for
/// `e^{x^p} ∫_x^inf e^{-y^p} dy`.
pub fn gautschi_bound(p: f64, x: f64) -> Result<f64> {
    let c = gautschi_constant(p)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("Gautschi's bound needs finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(c * (1.0 / c).powf(1.0 / p));
    }
    // x [(1 + 1/(C x^p))^{1/p} - 1] without cancellation.
    let u = 1.0 / (c * x.powf(p));
    Ok(c * x * (u.ln_1p() / p).exp_m1())
}

/// The quartic-potential estimate, term by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticEstimate {
    /// `∫_0^1 e^{x^4} ∫_x^inf e^{-y^4}`, by quadrature.
    pub head_exact: f64,
    /// `∫_0^1 gautschi_bound(4, x) dx`.
    pub head_gautschi: f64,
    /// `∫_0^1 dx / ([(x^4 + 1/C)^{1/4} + x][(x^4 + 1/C)^{1/2} + x^2])`.
    pub head_factored: f64,
    /// `∫_0^1 dx / ((1/C)^{1/4} [(1/C)^{1/2} + x^2])`, the first printed term.
    pub head_closed: f64,
    /// `∫_1^inf e^{y^4} ∫_y^inf e^{-z^4}`, by quadrature.
    pub tail_exact: f64,
    /// `∫_1^inf dy / (4 y^3) = 1/8`, the second printed term.
    pub tail_bound: f64,
    /// `head_closed + tail_bound`.
    pub bound: f64,
    /// `1 / bound`.
    pub rate: f64,
    /// `sup_x ∫_0^x e^{y^4} dy ∫_x^inf e^{-z^4} dz` by direct scan.
    pub delta: f64,
    /// `1 / (4 delta)`.
    pub delta_rate: f64,
}

/// Reproduces the chain of estimates for `L = d^2/dx^2 - 4x^3 d/dx`
/// (potential `-x^4`).
pub fn quartic_estimate(tol: &Tolerance) -> Result<QuarticEstimate> {
    let spec = DiffusionSpec::from_text("1", "-4*x^3")?;
    let c = gautschi_constant(4.0)?;
    let k = 1.0 / c;
    let head_exact = diff_mr(&spec, 0.0, tol)? - diff_mr(&spec, 1.0, tol)?;
    let head_gautschi = integrate(|x| gautschi_bound(4.0, x).unwrap_or(f64::NAN), 0.0, 1.0, tol)?.value;
    let head_factored = integrate(
        |x: f64| {
            let s = x.powi(4) + k;
            1.0 / ((s.powf(0.25) + x) * (s.sqrt() + x * x))
        },
        0.0,
        1.0,
        tol,
    )?
    .value;
    let head_closed = integrate(|x: f64| 1.0 / (k.powf(0.25) * (k.sqrt() + x * x)), 0.0, 1.0, tol)?.value;
    let tail_exact = diff_mr(&spec, 1.0, tol)?;
    let tail_bound = integrate(|y: f64| 0.25 / y.powi(3), 1.0, f64::INFINITY, tol)?.value;
    let bound = head_closed + tail_bound;
    let delta = diff_delta(&spec, tol)?.delta;
    Ok(QuarticEstimate {
        head_exact,
        head_gautschi,
        head_factored,
        head_closed,
        tail_exact,
        tail_bound,
        bound,
        rate: 1.0 / bound,
        delta,
        delta_rate: 0.25 / delta,
    })
}
