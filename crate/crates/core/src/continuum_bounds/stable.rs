//! SDEs driven by symmetric alpha-stable noise: the drift envelope `g`, its
//! running average `gtilde` and the integral `delta_r` that controls
//! strong ergodicity.
//!
//! The drift enters only through the radial profile
//! `p(r) = -<x, b(x)> / |x|^2` on `|x| = r`, supplied by the model. `g` is the
//! running infimum of `p ∨ 0` over `[r, inf)`, taken over a geometric sample
//! of radii; the sample makes `g` exact for monotone profiles and an
//! approximation otherwise.

use serde::Serialize;

use crate::chain_bounds::{combine_bounds, BoundSource, RateBounds};
use crate::model::StableSdeSpec;
use crate::numerics::{gamma_fn, integrate, integrate_checked, Tolerance};
use crate::{Error, Result};

/// Samples per octave of the envelope grid.
const PER_OCTAVE: usize = 32;
/// Octaves covered by the grid, starting at radius 1.
const OCTAVES: usize = 48;

/// The running-infimum envelope of a drift profile.
#[derive(Debug, Clone)]
pub struct DriftEnvelope<'a> {
    spec: &'a StableSdeSpec,
    radii: Vec<f64>,
    suffix_min: Vec<f64>,
    /// The raw profile decreased somewhere on the grid.
    pub corrected: bool,
}

impl<'a> DriftEnvelope<'a> {
    pub fn new(spec: &'a StableSdeSpec) -> Result<Self> {
        let n = PER_OCTAVE * OCTAVES + 1;
        let radii: Vec<f64> = (0..n).map(|k| 2f64.powf(k as f64 / PER_OCTAVE as f64)).collect();
        let mut values = Vec::with_capacity(n);
        for &r in &radii {
            let p = spec.radial_profile(r);
            if p.is_nan() {
                return Err(Error::NonFinite {
                    value: p,
                    at: format!("drift profile at r={r}"),
                });
            }
            values.push(p.max(0.0));
        }
        let mut suffix_min = values.clone();
        for k in (0..n - 1).rev() {
            suffix_min[k] = suffix_min[k].min(suffix_min[k + 1]);
        }
        let corrected = values.iter().zip(&suffix_min).any(|(v, s)| *v > s * (1.0 + 1e-12) + 1e-300);
        if corrected {
            log::warn!("drift profile is not nondecreasing; using its running infimum");
        }
        Ok(DriftEnvelope {
            spec,
            radii,
            suffix_min,
            corrected,
        })
    }

    /// `g(r) = inf_{s >= r} (p(s) ∨ 0)`.
    pub fn g(&self, r: f64) -> f64 {
        let here = self.spec.radial_profile(r).max(0.0);
        let k = self.radii.partition_point(|&s| s <= r);
        match self.suffix_min.get(k) {
            Some(&m) => here.min(m),
            // Beyond the grid: a coarse look further out.
            None => (1..=40).map(|j| self.spec.radial_profile(r * 2f64.powi(j)).max(0.0)).fold(here, f64::min),
        }
    }

    /// `∫_1^r g`.
    fn integral(&self, r: f64, tol: &Tolerance) -> Result<f64> {
        Ok(integrate(|s| self.g(s), 1.0, r, tol)?.value)
    }

    /// `gtilde(r) = (1/r) ∫_1^r g(s) ds`.
    pub fn gtilde(&self, r: f64, tol: &Tolerance) -> Result<f64> {
        check_radius(r, 1.0)?;
        Ok(self.integral(r, tol)? / r)
    }
}

fn check_radius(r: f64, min: f64) -> Result<()> {
    if !(r >= min) || !r.is_finite() {
        return Err(Error::invalid(format!("radius must be finite and >= {min}, got {r}")));
    }
    Ok(())
}

/// `g(r) = inf_{|x| >= r} {-<x, b(x)>/|x|^2 ∨ 0}`.
pub fn stable_g(spec: &StableSdeSpec, r: f64) -> Result<f64> {
    check_radius(r, 1.0)?;
    Ok(DriftEnvelope::new(spec)?.g(r))
}

/// `gtilde(r) = (1/r) ∫_1^r g(s) ds`.
pub fn stable_gtilde(spec: &StableSdeSpec, r: f64, tol: &Tolerance) -> Result<f64> {
    DriftEnvelope::new(spec)?.gtilde(r, tol)
}

fn delta_with(env: &DriftEnvelope, r: f64, tol: &Tolerance) -> Result<f64> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::invalid(format!("delta_r needs a finite r > 1, got {r}")));
    }
    let inner = tol.scaled(0.1);
    let base = env.integral(r, &inner)?;
    let mut failure = None;
    let out = integrate_checked(
        |s| {
            let mass = match integrate(|u| env.g(u), r, s, &inner) {
                Ok(q) => base + q.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    return 0.0;
                }
            };
            // 1 / (s gtilde(s)) = 1 / ∫_1^s g.
            if mass > 0.0 {
                1.0 / mass
            } else {
                f64::INFINITY
            }
        },
        r,
        tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    out.map(|q| q.value).map_err(|e| {
        if e.is_divergence() {
            Error::Divergent(format!("delta_r = ∫_r^inf ds/(s gtilde(s)) diverges at r={r}"))
        } else {
            e
        }
    })
}

/// `delta_r = ∫_r^inf 1/(s gtilde(s)) ds`, which bounds `sup_x E_x tau` of the
/// ball of radius `r`.
pub fn stable_delta_r(spec: &StableSdeSpec, r: f64, tol: &Tolerance) -> Result<f64> {
    delta_with(&DriftEnvelope::new(spec)?, r, tol)
}

/// `(C_{d,alpha}, Gamma_d)`: the normalising constant of the fractional
/// Laplacian and the surface area of the unit sphere.
pub fn stable_constants(d: usize, alpha: f64) -> Result<(f64, f64)> {
    if d < 1 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    let df = d as f64;
    let pi = std::f64::consts::PI;
    let c = alpha * 2f64.powf(alpha - 1.0) * gamma_fn(0.5 * (df + alpha))?
        / (pi.powf(0.5 * df) * gamma_fn(1.0 - 0.5 * alpha)?);
    let area = 2.0 * pi.powf(0.5 * df) / gamma_fn(0.5 * df)?;
    Ok((c, area))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableSummary {
    pub r: f64,
    /// `delta_r`, also a bound on the uniform mean hitting time of the ball.
    pub delta_r: Option<f64>,
    pub strongly_ergodic: bool,
    /// `kappa >= lambda1` holds (strongly ergodic and `alpha in (1, 2)`).
    pub kappa_at_least_lambda1: bool,
    /// `(r, delta_r)` at doubling radii, to watch `M_r -> 0`.
    pub decay: Vec<(f64, f64)>,
    pub envelope_corrected: bool,
}

pub fn stable_summary(spec: &StableSdeSpec, r: f64, tol: &Tolerance) -> Result<StableSummary> {
    let env = DriftEnvelope::new(spec)?;
    let delta_r = match delta_with(&env, r, tol) {
        Ok(v) => Some(v),
        Err(e) if e.is_divergence() => None,
        Err(e) => return Err(e),
    };
    let mut decay = Vec::new();
    if let Some(d) = delta_r {
        decay.push((r, d));
        let mut s = r;
        for _ in 0..6 {
            s *= 4.0;
            decay.push((s, delta_with(&env, s, tol)?));
        }
    }
    Ok(StableSummary {
        r,
        strongly_ergodic: delta_r.is_some(),
        kappa_at_least_lambda1: delta_r.is_some() && spec.alpha > 1.0,
        delta_r,
        decay,
        envelope_corrected: env.corrected,
    })
}

/// Rate bounds for a stable-driven SDE. Without a gap estimate only the
/// ergodicity verdict and the hitting bound are available.
pub fn stable_rate_bounds(spec: &StableSdeSpec, r: f64, lambda1: Option<f64>, tol: &Tolerance) -> Result<RateBounds> {
    let summary = stable_summary(spec, r, tol)?;
    let Some(delta_r) = summary.delta_r else {
        return Err(Error::Divergent(format!("delta_r is infinite at r={r}: not strongly ergodic")));
    };
    let mut b = RateBounds {
        m_h: Some(delta_r),
        hitting_set: Some(format!("{{|x| <= {r}}}")),
        delta: Some(delta_r),
        ..Default::default()
    };
    b.record("m_h", BoundSource::StableLyapunov, delta_r, Some(format!("delta_r at r={r}")));
    match lambda1 {
        Some(l) if summary.kappa_at_least_lambda1 => {
            b.lambda1_lower = Some(l);
            b.kappa_lower = l;
            b.record("kappa_lower", BoundSource::External, l, Some("kappa >= lambda1 for alpha in (1, 2)".into()));
        }
        Some(l) => {
            let (k, _) = combine_bounds(l, delta_r)?;
            b.lambda1_lower = Some(l);
            b.kappa_lower = k;
            b.record("kappa_lower", BoundSource::Combination, k, None);
        }
        None => b.notes.push("strongly ergodic; supply lambda1 for a numeric rate".into()),
    }
    if summary.envelope_corrected {
        b.notes.push("drift profile replaced by its running infimum".into());
    }
    b.check()?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriftProfile, RateFunction};
    use approx::assert_relative_eq;

    fn power_drift(eta: f64) -> StableSdeSpec {
        let b = RateFunction::parse(&format!("-x*abs(x)^({eta})"), "x").unwrap();
        StableSdeSpec::new(1.5, 1, DriftProfile::Drift(b)).unwrap()
    }

    #[test]
    fn power_drift_envelope() {
        let t = Tolerance::default();
        for eta in [0.0, 0.5, 1.0, 2.0] {
            let s = power_drift(eta);
            let env = DriftEnvelope::new(&s).unwrap();
            assert!(!env.corrected);
            for r in [1.0, 2.5, 10.0] {
                assert_relative_eq!(env.g(r), r.powf(eta), max_relative = 1e-12);
                let exact = (r.powf(eta + 1.0) - 1.0) / ((eta + 1.0) * r);
                assert_relative_eq!(env.gtilde(r, &t).unwrap(), exact, max_relative = 1e-10, epsilon = 1e-14);
                assert!(env.gtilde(r, &t).unwrap() <= env.g(r));
            }
        }
    }

    #[test]
    fn decreasing_profile_is_replaced_by_running_infimum() {
        let s = StableSdeSpec::new(1.2, 3, DriftProfile::Radial(RateFunction::parse("1/r + 0.5", "r").unwrap())).unwrap();
        let env = DriftEnvelope::new(&s).unwrap();
        assert!(env.corrected);
        let g: Vec<f64> = [1.0, 2.0, 10.0, 1e3].iter().map(|&r| env.g(r)).collect();
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
        assert!((g[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn delta_r_closed_form_and_threshold() {
        let t = Tolerance::default();
        // eta = 1: delta_r = ∫_r^inf 2/(s^2 - 1) ds = ln((r + 1)/(r - 1)).
        let s = power_drift(1.0);
        assert_relative_eq!(stable_delta_r(&s, 2.0, &t).unwrap(), 3f64.ln(), max_relative = 1e-8);
        assert_relative_eq!(stable_delta_r(&s, 5.0, &t).unwrap(), 1.5f64.ln(), max_relative = 1e-8);
        for eta in [-0.5, 0.0] {
            assert!(stable_delta_r(&power_drift(eta), 2.0, &t).unwrap_err().is_divergence(), "eta={eta}");
        }
        for eta in [0.25, 2.0] {
            assert!(stable_delta_r(&power_drift(eta), 2.0, &t).unwrap().is_finite());
        }
        let sum = stable_summary(&s, 2.0, &t).unwrap();
        assert!(sum.kappa_at_least_lambda1);
        assert!(sum.decay.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn constants() {
        let (c, area) = stable_constants(1, 1.0).unwrap();
        assert_relative_eq!(c, 1.0 / std::f64::consts::PI, max_relative = 1e-13);
        assert_relative_eq!(area, 2.0, max_relative = 1e-13);
        assert_relative_eq!(stable_constants(2, 0.5).unwrap().1, 2.0 * std::f64::consts::PI, max_relative = 1e-13);
        assert_relative_eq!(stable_constants(3, 1.0).unwrap().1, 4.0 * std::f64::consts::PI, max_relative = 1e-13);
        assert!(stable_constants(1, 2.0).is_err());
    }
}
