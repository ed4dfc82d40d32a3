//! Euler–Maruyama hitting times for `a f'' + b f'` reflected at 0.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::stats::{HitAccumulator, HitEstimate, RngConfig};
use crate::model::DiffusionSpec;
use crate::{Error, Result};

/// Largest allowed drift step as a fraction of `max(x, 1)`.
pub const MAX_DRIFT_STEP: f64 = 0.1;

/// Hitting time of `[0, r]` at step `dt`, with the same estimate at `2 dt`.
///
/// Discrete monitoring of the barrier biases the mean by `O(sqrt(dt))`; with
/// that rate, `mean(dt) - mean(2dt) = -(sqrt 2 - 1) c sqrt(dt)`, which gives
/// both the extrapolated value and the allowance below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionHitEstimate {
    pub fine: HitEstimate,
    pub coarse: HitEstimate,
    pub dt: f64,
    /// `mean(dt) - mean(2 dt)`.
    pub richardson_delta: f64,
    /// `|delta| / (sqrt 2 - 1) + 3 SE(delta)`.
    pub bias_allowance: f64,
    /// `mean(dt) + delta / (sqrt 2 - 1)`.
    pub extrapolated: f64,
}

impl DiffusionHitEstimate {
    /// True when `value` lies within `3 SE + bias allowance` of the fine estimate.
    pub fn consistent_with(&self, value: f64) -> bool {
        (self.fine.mean - value).abs() <= 3.0 * self.fine.std_error + self.bias_allowance
    }
}

fn em_once<R: Rng + ?Sized>(spec: &DiffusionSpec, x0: f64, r: f64, dt: f64, horizon: f64, rng: &mut R) -> Result<(f64, bool)> {
    let steps = (horizon / dt).ceil() as u64;
    let mut x = x0;
    for k in 1..=steps {
        let (a, b) = (spec.a.eval(x), spec.b.eval(x));
        let drift = b * dt;
        if !(drift.abs() <= MAX_DRIFT_STEP * x.max(1.0)) || !(a >= 0.0) {
            return Err(Error::Simulation(format!(
                "step dt={dt} too large at x={x}: drift step {drift}, a={a}"
            )));
        }
        let z: f64 = rng.sample(StandardNormal);
        x = (x + drift + (2.0 * a * dt).sqrt() * z).abs();
        if x <= r {
            return Ok((k as f64 * dt, false));
        }
    }
    Ok((steps as f64 * dt, true))
}

fn em_hitting(spec: &DiffusionSpec, x0: f64, r: f64, dt: f64, trials: usize, horizon: f64, rng: &RngConfig) -> Result<HitEstimate> {
    let parts = rng.batches(trials, |g, n| {
        let mut acc = HitAccumulator::default();
        for _ in 0..n {
            let (tau, censored) = em_once(spec, x0, r, dt, horizon, g)?;
            acc.push(tau, censored, None);
        }
        Ok(acc)
    })?;
    HitAccumulator::merge_all(parts).finish(None)
}

/// `E_{x0} tau_[0,r]` by Euler–Maruyama with reflection at 0, at steps `dt`
/// and `2 dt` on independent streams.
pub fn em_diffusion_hitting(
    spec: &DiffusionSpec,
    x0: f64,
    r: f64,
    dt: f64,
    trials: usize,
    horizon: f64,
    rng: &RngConfig,
) -> Result<DiffusionHitEstimate> {
    if !(dt > 0.0) || !(horizon > dt) || !horizon.is_finite() {
        return Err(Error::invalid(format!("need 0 < dt < horizon < inf (dt={dt}, horizon={horizon})")));
    }
    if !(r >= 0.0) || !(x0 >= 0.0) || !x0.is_finite() || trials == 0 {
        return Err(Error::invalid(format!("need x0, r >= 0 and trials > 0 (x0={x0}, r={r})")));
    }
    if x0 <= r {
        let zero = HitEstimate::zero(trials, None);
        return Ok(DiffusionHitEstimate {
            fine: zero,
            coarse: zero,
            dt,
            richardson_delta: 0.0,
            bias_allowance: 0.0,
            extrapolated: 0.0,
        });
    }
    let fine = em_hitting(spec, x0, r, dt, trials, horizon, rng)?;
    let coarse = em_hitting(spec, x0, r, 2.0 * dt, trials, horizon, &rng.offset(1))?;
    let delta = fine.mean - coarse.mean;
    let se = fine.std_error.hypot(coarse.std_error);
    let lever = 2f64.sqrt() - 1.0;
    Ok(DiffusionHitEstimate {
        fine,
        coarse,
        dt,
        richardson_delta: delta,
        bias_allowance: delta.abs() / lever + 3.0 * se,
        extrapolated: fine.mean + delta / lever,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum_bounds::diff_mr;
    use crate::numerics::Tolerance;
    use crate::oracle::{discretize_diffusion, hitting_moments};

    /// `E_x tau_[0,r]` from the reflecting mesh generator on `[0, length]`.
    fn mesh_hitting(spec: &DiffusionSpec, x0: f64, r: f64, length: f64, h: f64) -> f64 {
        let points = (length / h).round() as usize + 1;
        let g = discretize_diffusion(spec, length, points).unwrap();
        let target: Vec<usize> = (0..points).take_while(|&i| i as f64 * h <= r + 1e-12).collect();
        hitting_moments(&g, &target, 1).unwrap()[(x0 / h).round() as usize]
    }

    #[test]
    fn ornstein_uhlenbeck_matches_mesh_solve() {
        let spec = DiffusionSpec::from_text("1", "-x").unwrap();
        let exact = mesh_hitting(&spec, 2.0, 0.5, 8.0, 1e-3);
        let est = em_diffusion_hitting(&spec, 2.0, 0.5, 1e-3, 20_000, 200.0, &RngConfig::new(31)).unwrap();
        assert_eq!(est.fine.censored, 0);
        assert!(est.consistent_with(exact), "{est:?} vs {exact}");
        // Discrete monitoring only delays hitting.
        assert!(est.fine.mean >= exact - 3.0 * est.fine.std_error);
    }

    #[test]
    fn quartic_hitting_below_m_r() {
        let spec = DiffusionSpec::from_text("1", "-4*x^3").unwrap();
        let m = diff_mr(&spec, 0.5, &Tolerance::default()).unwrap();
        let est = em_diffusion_hitting(&spec, 3.0, 0.5, 5e-4, 5000, 100.0, &RngConfig::new(2)).unwrap();
        assert!(est.fine.mean <= m + 3.0 * est.fine.std_error + est.bias_allowance, "{est:?} vs M_r={m}");
    }

    #[test]
    fn start_at_level_and_step_check() {
        let spec = DiffusionSpec::from_text("1", "-x").unwrap();
        let est = em_diffusion_hitting(&spec, 0.5, 0.5, 1e-3, 10, 1.0, &RngConfig::new(0)).unwrap();
        assert_eq!(est.fine.mean, 0.0);
        let steep = DiffusionSpec::from_text("1", "-4*x^3").unwrap();
        let err = em_diffusion_hitting(&steep, 20.0, 0.5, 1e-2, 10, 10.0, &RngConfig::new(0)).unwrap_err();
        assert!(matches!(err, Error::Simulation(_)));
    }

    #[test]
    fn reproducible() {
        let spec = DiffusionSpec::from_text("1", "-x").unwrap();
        let run = || em_diffusion_hitting(&spec, 1.0, 0.5, 1e-2, 500, 50.0, &RngConfig::new(4)).unwrap();
        assert_eq!(run(), run());
    }
}
