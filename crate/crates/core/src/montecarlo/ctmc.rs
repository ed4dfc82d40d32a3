//! Exact trajectories of continuous-time chains.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::stats::{HitAccumulator, HitEstimate, RngConfig, Welford};
use crate::model::{BirthDeathSpec, SingleDeathSpec};
use crate::oracle::GeneratorMatrix;
use crate::{Error, Result};

/// Anything that lists the outgoing jumps of a state.
pub trait JumpRates: Sync {
    /// Replaces `out` with the positive off-diagonal rates of `x`.
    fn jumps(&self, x: usize, out: &mut Vec<(usize, f64)>);
}

impl JumpRates for GeneratorMatrix {
    fn jumps(&self, x: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend(self.row(x).iter().copied().filter(|&(_, q)| q > 0.0));
    }
}

impl JumpRates for BirthDeathSpec {
    fn jumps(&self, x: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (a, b) = (self.death(x), self.birth(x));
        if x > 0 && a != 0.0 {
            out.push((x - 1, a));
        }
        if b != 0.0 {
            out.push((x + 1, b));
        }
    }
}

impl JumpRates for SingleDeathSpec {
    fn jumps(&self, x: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend(self.row(x).into_iter().filter(|&(_, q)| q != 0.0));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    /// Jump times, starting with `0`.
    pub times: Vec<f64>,
    /// `states[k]` is occupied on `[times[k], times[k+1])`.
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl Path {
    /// Time spent in each state on `[0, horizon]`, indexed by state.
    pub fn occupation(&self) -> Vec<f64> {
        let top = self.states.iter().copied().max().unwrap_or(0);
        let mut occ = vec![0.0; top + 1];
        for (k, &s) in self.states.iter().enumerate() {
            let end = self.times.get(k + 1).copied().unwrap_or(self.horizon);
            occ[s] += end - self.times[k];
        }
        occ
    }
}

/// Total rate and a categorical choice among `jumps`; errors on a bad rate.
#[inline]
fn step<R: Rng + ?Sized>(x: usize, jumps: &[(usize, f64)], rng: &mut R) -> Result<Option<(f64, usize)>> {
    let mut total = 0.0;
    for &(_, q) in jumps {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Simulation(format!("rate {q} out of state {x}")));
        }
        total += q;
    }
    if jumps.is_empty() {
        return Ok(None);
    }
    if !total.is_finite() {
        return Err(Error::Simulation(format!("total rate overflows at state {x}")));
    }
    let hold: f64 = Exp1.sample(rng);
    let mut u = rng.random::<f64>() * total;
    let mut next = jumps[jumps.len() - 1].0;
    for &(j, q) in jumps {
        if u < q {
            next = j;
            break;
        }
        u -= q;
    }
    Ok(Some((hold / total, next)))
}

/// The full jump sequence on `[0, horizon]`: exponential holding at the total
/// rate, then a jump chosen proportionally to its rate.
pub fn simulate_ctmc<M, R>(model: &M, x0: usize, horizon: f64, rng: &mut R) -> Result<Path>
where
    M: JumpRates + ?Sized,
    R: Rng + ?Sized,
{
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let mut path = Path {
        times: vec![0.0],
        states: vec![x0],
        horizon,
    };
    let mut buf = Vec::new();
    let (mut t, mut x) = (0.0, x0);
    loop {
        model.jumps(x, &mut buf);
        let Some((hold, next)) = step(x, &buf, rng)? else {
            break;
        };
        t += hold;
        if t >= horizon {
            break;
        }
        x = next;
        path.times.push(t);
        path.states.push(x);
    }
    Ok(path)
}

/// Target set membership by sorted lookup.
struct Target(Vec<usize>);

impl Target {
    fn new(h: &[usize]) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::invalid("target set must be nonempty"));
        }
        let mut v = h.to_vec();
        v.sort_unstable();
        v.dedup();
        Ok(Target(v))
    }

    #[inline]
    fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }
}

/// `tau_H` on one trajectory, capped at `horizon`; `true` when censored.
fn hit_once<M, R>(model: &M, x0: usize, target: &Target, horizon: f64, buf: &mut Vec<(usize, f64)>, rng: &mut R) -> Result<(f64, bool)>
where
    M: JumpRates + ?Sized,
    R: Rng + ?Sized,
{
    let (mut t, mut x) = (0.0, x0);
    while !target.contains(x) {
        model.jumps(x, buf);
        let Some((hold, next)) = step(x, buf, rng)? else {
            return Ok((horizon, true));
        };
        t += hold;
        if t >= horizon {
            return Ok((horizon, true));
        }
        x = next;
    }
    Ok((t, false))
}

/// Mean and standard error of `tau_H` from `x0` over `trials` trajectories,
/// plus `E e^{beta tau}` when `beta` is given.
pub fn mc_hitting<M>(
    model: &M,
    x0: usize,
    target: &[usize],
    trials: usize,
    beta: Option<f64>,
    horizon: f64,
    rng: &RngConfig,
) -> Result<HitEstimate>
where
    M: JumpRates + ?Sized,
{
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    let target = Target::new(target)?;
    if target.contains(x0) {
        return Ok(HitEstimate::zero(trials, beta));
    }
    let parts = rng.batches(trials, |r, n| {
        let mut acc = HitAccumulator::default();
        let mut buf = Vec::new();
        for _ in 0..n {
            let (tau, censored) = hit_once(model, x0, &target, horizon, &mut buf, r)?;
            acc.push(tau, censored, beta);
        }
        Ok(acc)
    })?;
    HitAccumulator::merge_all(parts).finish(beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    /// `max` over probes of the empirical `P_x(tau_H > t0)`.
    pub delta_hat: f64,
    /// Standard error at the maximizing probe.
    pub std_error: f64,
    /// `(probe, P_x(tau_H > t0), standard error)`.
    pub per_probe: Vec<(usize, f64, f64)>,
    /// `t0 / (1 - delta_hat)`.
    pub moment_bound: f64,
    pub t0: f64,
}

/// Empirical tail `delta_H(t0)` over a finite probe set, converted into a
/// first-moment bound. The supremum over all states is approximated by the
/// probe maximum; for stochastically monotone chains the largest probe
/// dominates.
pub fn mc_tail<M>(model: &M, probes: &[usize], target: &[usize], t0: f64, trials: usize, rng: &RngConfig) -> Result<TailEstimate>
where
    M: JumpRates + ?Sized,
{
    if probes.is_empty() {
        return Err(Error::invalid("at least one probe state is required"));
    }
    if !(t0 > 0.0) || !t0.is_finite() || trials == 0 {
        return Err(Error::invalid(format!("need t0 > 0 and trials > 0 (t0={t0}, trials={trials})")));
    }
    let set = Target::new(target)?;
    let mut per_probe = Vec::with_capacity(probes.len());
    for (k, &x) in probes.iter().enumerate() {
        if set.contains(x) {
            per_probe.push((x, 0.0, 0.0));
            continue;
        }
        let parts = rng.offset(k).batches(trials, |r, n| {
            let mut w = Welford::default();
            let mut buf = Vec::new();
            for _ in 0..n {
                let (_, survived) = hit_once(model, x, &set, t0, &mut buf, r)?;
                w.push(if survived { 1.0 } else { 0.0 });
            }
            Ok(w)
        })?;
        let w = parts.into_iter().fold(Welford::default(), |mut a, b| {
            a.merge(&b);
            a
        });
        per_probe.push((x, w.mean(), w.std_error()));
    }
    let &(_, delta_hat, std_error) = per_probe
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty probes");
    if delta_hat >= 1.0 {
        return Err(Error::Simulation(format!("no trajectory reached the target by t0={t0}")));
    }
    Ok(TailEstimate {
        delta_hat,
        std_error,
        per_probe,
        moment_bound: t0 / (1.0 - delta_hat),
        t0,
    })
}
