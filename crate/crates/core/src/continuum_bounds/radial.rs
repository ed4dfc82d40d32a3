//! Radial comparison integral for diffusions on manifolds.

use super::exp_integral::ExpIntegrand;
use crate::model::RadialSpec;
use crate::numerics::{integrate, integrate_checked, Tolerance};
use crate::{Error, Result};

/// `∫_y^D exp(Cbar(z) - Cbar(y)) dz` with `Cbar' = beta`.
fn inner(spec: &RadialSpec, y: f64, tol: &Tolerance) -> Result<f64> {
    let f = ExpIntegrand {
        g: |r: f64| spec.beta.eval(r),
        w: |_| 1.0,
        sign: 1.0,
    };
    match spec.outer {
        Some(d) => f.finite(y, d),
        None => f.to_infinity(y, tol),
    }
}

/// `deltabar_p = ∫_p^D e^{-Cbar(y)} ∫_y^D e^{Cbar(z)} dz dy`, which bounds
/// `sup_{rho(x) > p} E_x tau_{B_p}`.
pub fn radial_entrance_bound(spec: &RadialSpec, p: f64, tol: &Tolerance) -> Result<f64> {
    if !(p >= spec.r0) || !p.is_finite() {
        return Err(Error::invalid(format!("p must be finite and >= r0 = {}, got {p}", spec.r0)));
    }
    let inner_tol = tol.scaled(0.1);
    let mut failure = None;
    let mut f = |y: f64| match inner(spec, y, &inner_tol) {
        Ok(v) => v,
        Err(e) if e.is_divergence() => f64::INFINITY,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let value = match spec.outer {
        Some(d) if p >= d => return Ok(0.0),
        Some(d) => integrate(&mut f, p, d, tol).map(|r| r.value),
        None => integrate_checked(&mut f, p, tol).map(|r| r.value),
    };
    if let Some(e) = failure {
        return Err(e);
    }
    value.map_err(|e| {
        if e.is_divergence() {
            Error::Divergent(format!("no rho-entrance boundary: the radial integral from p={p} diverges"))
        } else {
            e
        }
    })
}
