//! Transition probabilities by uniformization and total-variation decay.
//!
//! `P_t = sum_k Pois(L t; k) K^k` with `K = I + Q / L` and `L` the largest
//! exit rate. Every term is a stochastic matrix, so the computed rows stay
//! probability vectors up to the Poisson truncation error.

use rayon::prelude::*;
use serde::Serialize;

use super::GeneratorMatrix;
use statrs::function::gamma::ln_gamma;

use crate::numerics::{fit_exp_rate, ExpFit};
use crate::{Error, Result};

/// Default bound on the discarded Poisson mass on each side.
pub const POISSON_TOL: f64 = 1e-14;
/// Largest `L t` attempted.
const MAX_JUMPS: f64 = 5e7;

/// Time-indexed `sup_x ||P_t(x, .) - pi||` with the half-L1 normalization,
/// so values lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub tv: Vec<f64>,
    /// `per_state[m][x]` is the distance from state `x` at `times[m]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_state: Option<Vec<Vec<f64>>>,
}

impl DecayCurve {
    /// Exponential fit over the points with `t` in `[from, to]`.
    pub fn fit(&self, from: f64, to: f64) -> Result<ExpFit> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.tv)
            .filter(|(t, _)| **t >= from && **t <= to)
            .map(|(&t, &v)| (t, v))
            .collect();
        if let Some(&(t, v)) = pts.iter().find(|p| p.1 < 1e-12) {
            return Err(Error::invalid(format!(
                "curve has underflowed to {v:e} at t={t}; shrink the fit window"
            )));
        }
        fit_exp_rate(&pts)
    }

    /// Columns `t, tv_sup` and, when present, `x0, x1, ...`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let states = self.per_state.as_ref().map_or(0, |p| p.first().map_or(0, Vec::len));
        let mut header = vec!["t".to_string(), "tv_sup".to_string()];
        header.extend((0..states).map(|x| format!("x{x}")));
        let io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e),
        };
        w.write_record(&header).map_err(io)?;
        for (m, (&t, &v)) in self.times.iter().zip(&self.tv).enumerate() {
            let mut rec = vec![format!("{t:e}"), format!("{v:e}")];
            if let Some(p) = &self.per_state {
                rec.extend(p[m].iter().map(|d| format!("{d:e}")));
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }
}

/// Poisson weights `Pois(mean; k)` for `k` in `[left, left + w.len())`, with
/// at most `tol` of the mass discarded on each side.
fn poisson_window(mean: f64, tol: f64) -> (usize, Vec<f64>) {
    if mean == 0.0 {
        return (0, vec![1.0]);
    }
    let ln_w = |k: usize| -mean + k as f64 * mean.ln() - ln_gamma(k as f64 + 1.0);
    let mode = mean.floor() as usize;
    // Right tail: sum_{k>r} w_k <= w_{r+1} / (1 - mean/(r+2)) once r+2 > mean.
    let mut right = mode;
    loop {
        let ratio = mean / (right as f64 + 2.0);
        if ratio < 1.0 && ln_w(right + 1).exp() / (1.0 - ratio) < tol {
            break;
        }
        right += 1;
    }
    // Left tail: sum_{k<l} w_k <= w_{l-1} / (1 - (l-1)/mean).
    let mut left = mode;
    while left > 0 {
        let ratio = (left as f64 - 1.0) / mean;
        if ratio < 1.0 && ln_w(left - 1).exp() / (1.0 - ratio) < tol {
            break;
        }
        left -= 1;
    }
    // Ratio recurrences outward from the mode, then normalization: the
    // log-gamma route loses ~1e-10 relative accuracy once k is near 1e5.
    let mut w = vec![0.0; right - left + 1];
    w[mode - left] = 1.0;
    for k in mode + 1..=right {
        w[k - left] = w[k - 1 - left] * mean / k as f64;
    }
    for k in (left..mode).rev() {
        w[k - left] = w[k + 1 - left] * (k + 1) as f64 / mean;
    }
    let total: f64 = w.iter().sum();
    (left, w.into_iter().map(|v| v / total).collect())
}

/// Distributions at each of `times` (sorted, nonnegative) starting from `x`.
///
/// States flagged in `absorbing` are made absorbing. The result is indexed
/// `[time][state]`.
pub fn transient_distributions(
    q: &GeneratorMatrix,
    x: usize,
    times: &[f64],
    absorbing: Option<&[bool]>,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = q.len();
    if x >= n {
        return Err(Error::invalid(format!("start state {x} outside {n} states")));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.first().map_or(false, |t| !(*t >= 0.0)) {
        return Err(Error::invalid("times must be nonnegative and nondecreasing"));
    }
    let frozen = |i: usize| absorbing.map_or(false, |a| a[i]);
    let exit: Vec<f64> = (0..n).map(|i| if frozen(i) { 0.0 } else { q.exit_rate(i) }).collect();
    let lam = exit.iter().copied().fold(0.0, f64::max);
    let mut start = vec![0.0; n];
    start[x] = 1.0;
    if lam == 0.0 {
        return Ok(vec![start; times.len()]);
    }
    let t_max = times.last().copied().unwrap_or(0.0);
    if lam * t_max > MAX_JUMPS {
        return Err(Error::invalid(format!(
            "uniformization needs about {:.3e} jumps (rate {lam:.3e}, time {t_max}); rescale the time grid",
            lam * t_max
        )));
    }
    let windows: Vec<(usize, Vec<f64>)> = times.iter().map(|&t| poisson_window(lam * t, tol)).collect();
    let k_max = windows.iter().map(|(l, w)| l + w.len() - 1).max().unwrap_or(0);
    let mut out = vec![vec![0.0; n]; times.len()];
    let mut v = start;
    let mut next = vec![0.0; n];
    for k in 0..=k_max {
        for (m, (left, w)) in windows.iter().enumerate() {
            if k >= *left && k < left + w.len() {
                let wk = w[k - left];
                for (o, p) in out[m].iter_mut().zip(&v) {
                    *o += wk * p;
                }
            }
        }
        if k == k_max {
            break;
        }
        // v <- v K.
        for j in 0..n {
            next[j] = v[j] * (1.0 - exit[j] / lam);
        }
        for i in 0..n {
            if v[i] == 0.0 || frozen(i) {
                continue;
            }
            let vi = v[i] / lam;
            for &(j, r) in q.row(i) {
                next[j] += vi * r;
            }
        }
        std::mem::swap(&mut v, &mut next);
    }
    Ok(out)
}

fn half_l1(p: &[f64], pi: &[f64]) -> f64 {
    0.5 * p.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn tv_decay(q: &GeneratorMatrix, times: &[f64]) -> Result<DecayCurve> {
    tv_decay_with(q, times, POISSON_TOL)
}

/// [`tv_decay`] with an explicit Poisson truncation tolerance.
pub fn tv_decay_with(q: &GeneratorMatrix, times: &[f64], tol: f64) -> Result<DecayCurve> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times must increase strictly"));
    }
    let rows: Vec<Vec<Vec<f64>>> = (0..q.len())
        .into_par_iter()
        .map(|x| transient_distributions(q, x, times, None, tol))
        .collect::<Result<_>>()?;
    let pi = q.pi();
    let per_state: Vec<Vec<f64>> = (0..times.len())
        .map(|m| rows.iter().map(|r| half_l1(&r[m], pi)).collect())
        .collect();
    let tv = per_state.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    Ok(DecayCurve {
        times: times.to_vec(),
        tv,
        per_state: Some(per_state),
    })
}

/// `P_x[tau_H > t]` at each time, from the chain with `H` absorbing.
pub fn survival(q: &GeneratorMatrix, target: &[usize], x: usize, times: &[f64]) -> Result<Vec<f64>> {
    let mut absorbing = vec![false; q.len()];
    for &h in target {
        absorbing[h] = true;
    }
    let dist = transient_distributions(q, x, times, Some(&absorbing), POISSON_TOL)?;
    Ok(dist
        .iter()
        .map(|p| p.iter().zip(&absorbing).filter(|(_, &a)| !a).map(|(v, _)| v).sum())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaEstimate {
    pub rate: f64,
    pub window: (f64, f64),
    pub fit: ExpFit,
}

/// Window used when none is given: where the sup distance lies in this band.
const AUTO_BAND: (f64, f64) = (1e-10, 1e-4);

/// Decay rate of `sup_x ||P_t(x, .) - pi||` fitted over a late-time window.
///
/// Without an explicit window the horizon is doubled until the curve drops
/// below `1e-10`, and the fit uses the part of a fine grid lying between
/// `1e-10` and `1e-4`.
pub fn kappa_empirical(q: &GeneratorMatrix, window: Option<(f64, f64)>) -> Result<KappaEstimate> {
    if let Some((a, b)) = window {
        if !(b > a) || !(a >= 0.0) {
            return Err(Error::invalid(format!("fit window [{a}, {b}] is empty")));
        }
        let times: Vec<f64> = (0..32).map(|k| a + (b - a) * k as f64 / 31.0).collect();
        let curve = tv_decay(q, &times)?;
        let fit = curve.fit(a, b)?;
        return Ok(KappaEstimate { rate: fit.rate, window: (a, b), fit });
    }
    let lam = q.max_exit_rate();
    if lam == 0.0 {
        return Err(Error::invalid("generator has no transitions"));
    }
    let mut horizon = 1.0 / lam;
    let mut reached = false;
    for _ in 0..60 {
        let c = tv_decay(q, &[horizon])?;
        if c.tv[0] < AUTO_BAND.0 {
            reached = true;
            break;
        }
        horizon *= 2.0;
    }
    if !reached {
        return Err(Error::Inconclusive("total variation did not fall below 1e-10".into()));
    }
    for points in [96usize, 384, 1536] {
        let times: Vec<f64> = (1..=points).map(|k| horizon * k as f64 / points as f64).collect();
        let curve = tv_decay(q, &times)?;
        let band: Vec<f64> = times
            .iter()
            .zip(&curve.tv)
            .filter(|(_, v)| **v >= AUTO_BAND.0 && **v <= AUTO_BAND.1)
            .map(|(t, _)| *t)
            .collect();
        if band.len() >= 16 {
            let (a, b) = (band[0], band[band.len() - 1]);
            let fit = curve.fit(a, b)?;
            return Ok(KappaEstimate { rate: fit.rate, window: (a, b), fit });
        }
    }
    Err(Error::Inconclusive("could not place 16 grid points inside the fit band".into()))
}
