//! Least-squares fit of an exponential decay rate.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    /// Negated slope of `ln v` against `t`.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `v ~ C exp(-rate t)` by ordinary least squares on `ln v`.
pub fn fit_exp_rate(curve: &[(f64, f64)]) -> Result<ExpFit> {
    if curve.len() < 5 {
        return Err(Error::invalid(format!("exponential fit needs >= 5 points, got {}", curve.len())));
    }
    for w in curve.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::invalid(format!("fit times must increase strictly ({} then {})", w[0].0, w[1].0)));
        }
    }
    if let Some(&(t, v)) = curve.iter().find(|&&(_, v)| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("fit values must be positive and finite, got {v} at t={t}")));
    }
    let n = curve.len() as f64;
    let mt = curve.iter().map(|p| p.0).sum::<f64>() / n;
    let my = curve.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in curve {
        let (dt, dy) = (t - mt, v.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt <= 0.0 {
        return Err(Error::invalid("degenerate fit window"));
    }
    let slope = sty / stt;
    let r_squared = if syy > 0.0 { (sty * sty / (stt * syy)).min(1.0) } else { 1.0 };
    Ok(ExpFit {
        rate: -slope,
        intercept: my - slope * mt,
        r_squared,
        points: curve.len(),
    })
}
