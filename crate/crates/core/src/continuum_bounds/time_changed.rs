//! Time-changed one-dimensional symmetric alpha-stable processes,
//! `1 < alpha < 2`, with speed `a(x)^-1`.

use serde::Serialize;

use crate::chain_bounds::{BoundSource, RateBounds};
use crate::model::TimeChangedStableSpec;
use crate::numerics::{gamma_fn, integrate, integrate_checked, Tolerance};
use crate::{Error, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::invalid(format!("alpha must lie in (1, 2), got {alpha}")));
    }
    Ok(())
}

/// `omega_alpha = -2 / (cos(pi alpha / 2) Gamma(alpha))`.
pub fn tc_omega(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-2.0 / ((0.5 * std::f64::consts::PI * alpha).cos() * gamma_fn(alpha)?))
}

/// Green function of the stable process killed at 0.
pub fn tc_green(alpha: f64, x: f64, y: f64) -> Result<f64> {
    let omega = tc_omega(alpha)?;
    let p = alpha - 1.0;
    let bracket = y.abs().powf(p) + x.abs().powf(p) - (y - x).abs().powf(p);
    // The bracket is nonnegative by subadditivity of t^p; clip rounding.
    Ok(0.25 * omega * bracket.max(0.0))
}

/// `∫_0^inf f(y) dy + ∫_0^inf f(-y) dy` with an interior breakpoint.
fn whole_line(f: impl Fn(f64) -> f64, kink: f64, tol: &Tolerance) -> Result<f64> {
    let mut total = 0.0;
    for side in [1.0, -1.0] {
        let g = |u: f64| f(side * u);
        let k = side * kink;
        let start = if k > 0.0 {
            total += integrate(&g, 0.0, k, tol)?.value;
            k
        } else {
            0.0
        };
        total += integrate_checked(&g, start, tol)?.value;
    }
    Ok(total)
}

/// `E_x tau_0 = ∫ G(x, y) / a(y) dy`.
pub fn tc_hit_moment(spec: &TimeChangedStableSpec, x: f64, tol: &Tolerance) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("starting point must be finite, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let alpha = spec.alpha;
    tc_green(alpha, x, 1.0)?;
    whole_line(|y| tc_green(alpha, x, y).unwrap_or(f64::NAN) / spec.a.eval(y), x, tol)
}

/// `I = ∫ |x|^{alpha-1} / a(x) dx`.
pub fn tc_integral(spec: &TimeChangedStableSpec, tol: &Tolerance) -> Result<f64> {
    let p = spec.alpha - 1.0;
    whole_line(|x| x.abs().powf(p) / spec.a.eval(x), 0.0, tol).map_err(|e| {
        if e.is_divergence() {
            Error::Divergent("I = ∫ |x|^(alpha-1) / a(x) dx diverges".into())
        } else {
            e
        }
    })
}

/// Sampled growth check of `a(x)^{1/alpha} / |x|^gamma` for some `gamma > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovDiagnostic {
    /// Smallest local growth exponent of `a^{1/alpha}` over the outer samples.
    pub exponent: f64,
    pub gamma: f64,
    /// Smallest sampled `a(x)^{1/alpha} / |x|^gamma`.
    pub min_ratio: f64,
    pub holds: bool,
}

pub fn tc_lyapunov_diagnostic(spec: &TimeChangedStableSpec) -> LyapunovDiagnostic {
    let radii: Vec<f64> = (4..=40).map(|k| 2f64.powi(k)).collect();
    let root = |x: f64| spec.a.eval(x).powf(1.0 / spec.alpha);
    let mut exponent = f64::INFINITY;
    for side in [1.0, -1.0] {
        let logs: Vec<f64> = radii.iter().map(|&r| root(side * r).ln()).collect();
        let n = logs.len();
        for k in n - 8..n {
            exponent = exponent.min((logs[k] - logs[k - 1]) / 2f64.ln());
        }
    }
    let gamma = if exponent > 1.0 { 0.5 * (1.0 + exponent) } else { 1.0 };
    let min_ratio = radii
        .iter()
        .flat_map(|&r| [r, -r])
        .map(|x| root(x) / x.abs().powf(gamma))
        .fold(f64::INFINITY, f64::min);
    LyapunovDiagnostic {
        exponent,
        gamma,
        min_ratio,
        holds: exponent > 1.0 && min_ratio > 0.0,
    }
}

/// `kappa >= 1 / (omega_alpha I)`.
pub fn tc_rate_bound(spec: &TimeChangedStableSpec, tol: &Tolerance) -> Result<RateBounds> {
    let omega = tc_omega(spec.alpha)?;
    let i = tc_integral(spec, tol)?;
    let bound = 1.0 / (omega * i);
    let mut b = RateBounds {
        kappa_lower: bound,
        lambda1_lower: Some(bound),
        dirichlet_lower: Some(bound),
        m_h: Some(omega * i),
        hitting_set: Some("{0}".into()),
        s: Some(i),
        ..Default::default()
    };
    b.record("kappa_lower", BoundSource::GreenIntegral, bound, Some(format!("omega_alpha = {omega}, I = {i}")));
    let diag = tc_lyapunov_diagnostic(spec);
    if diag.holds {
        b.notes.push(format!(
            "sampled growth: a^(1/alpha) grows like |x|^{:.3}, so liminf a^(1/alpha)/|x|^{:.3} > 0 on the samples",
            diag.exponent, diag.gamma
        ));
    }
    b.check()?;
    Ok(b)
}
