//! Birth-death chains on `{0, 1, ...}`.
//!
//! All series are evaluated through ratio recursions that never form `mu_i`
//! itself, so factorial-type growth or decay of the weights cannot overflow:
//!
//! * `R_n = sum_{j>=n} mu_j / mu_n = 1 + (b_n / a_{n+1}) R_{n+1}`, summed
//!   forward as a series of ratio products;
//! * `E_j = mu_j sum_{k<j} 1/(mu_k b_k)`, with `E_{j+1} = (b_j E_j + 1) / a_{j+1}`,
//!   so that `S_n = sum_{j>n} E_j^(n)` where the recursion restarts at `n`;
//! * `Q_k = sum_{j<=k} mu_j / mu_k = 1 + (a_k / b_{k-1}) Q_{k-1}`, giving
//!   `Sbar_i = sum_{k<i} Q_k / b_k`;
//! * `delta_n = (sum_{i>=n} mu_i)(sum_{i<n} 1/(mu_i b_i)) = R_n E_n`.

use serde::Serialize;

use super::{BoundSource, HittingSummary, RateBounds};
use crate::model::BirthDeathSpec;
use crate::numerics::{sum_series, Tolerance};
use crate::{Error, Result};

/// Consecutive indices without a new maximum before the tail test is tried.
const SCAN_WINDOW: usize = 64;
/// Hard cap on scanned indices.
const SCAN_CAP: usize = 1_000_000;

fn in_range(spec: &BirthDeathSpec, j: usize) -> bool {
    spec.states.map_or(true, |n| j < n)
}

/// `ln mu_n`; `-inf` beyond the top of a finite chain.
pub fn bd_log_mu(spec: &BirthDeathSpec, n: usize) -> Result<f64> {
    if !in_range(spec, n) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut acc = 0.0;
    for j in 0..n {
        acc += spec.birth(j).ln() - spec.death(j + 1).ln();
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite {
            value: acc,
            at: format!("ln mu_{n}"),
        });
    }
    Ok(acc)
}

/// `mu_n = b_0 ... b_{n-1} / (a_1 ... a_n)`, accumulated in log space.
pub fn bd_mu(spec: &BirthDeathSpec, n: usize) -> Result<f64> {
    let l = bd_log_mu(spec, n)?;
    let mu = l.exp();
    if mu.is_infinite() {
        return Err(Error::NonFinite {
            value: mu,
            at: format!("mu_{n} (ln mu = {l})"),
        });
    }
    Ok(mu)
}

/// `R_n = sum_{j >= n} mu_j / mu_n`.
fn tail_ratio(spec: &BirthDeathSpec, n: usize, tol: &Tolerance) -> Result<f64> {
    let mut ratio = 1.0;
    let r = sum_series(
        |k| {
            if k > 0 {
                let j = n + k;
                ratio = if in_range(spec, j) { ratio * spec.birth(j - 1) / spec.death(j) } else { 0.0 };
            }
            ratio
        },
        tol,
    )?;
    r.finite(&format!("stationary tail mass beyond {n}"))
}

/// `S_n = sum_{k >= n} (mu_k b_k)^-1 sum_{j > k} mu_j`, the uniform mean
/// hitting time of `{0, ..., n}`.
fn s_tail(spec: &BirthDeathSpec, n: usize, tol: &Tolerance) -> Result<f64> {
    let mut e = 0.0;
    let r = sum_series(
        |k| {
            let j = n + 1 + k;
            if !in_range(spec, j) {
                return 0.0;
            }
            e = (spec.birth(j - 1) * e + 1.0) / spec.death(j);
            e
        },
        tol,
    )?;
    r.finite(&format!("hitting series S_{n}"))
}

/// The `j`-th summand of `S = sum_{j>=1} R_j / a_j` (for `j >= 1`).
pub fn bd_s_summand(spec: &BirthDeathSpec, j: usize, tol: &Tolerance) -> Result<f64> {
    if j == 0 {
        return Err(Error::invalid("summands of S start at j = 1"));
    }
    if !in_range(spec, j) {
        return Ok(0.0);
    }
    Ok(tail_ratio(spec, j, tol)? / spec.death(j))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntranceVerdict {
    pub is_entrance: bool,
    /// Whether `sum_i mu_i sum_{j>=i} 1/(mu_j b_j)` is infinite; `None` for a
    /// finite state space, where the question does not arise.
    pub first_diverges: Option<bool>,
    /// `S`, when finite.
    pub s: Option<f64>,
    pub s_error: f64,
}

/// Checks the two series conditions for an entrance boundary at infinity.
pub fn bd_entrance_boundary(spec: &BirthDeathSpec, tol: &Tolerance) -> Result<EntranceVerdict> {
    let first_diverges = if spec.states.is_some() {
        None
    } else {
        // sum_i mu_i sum_{j>=i} 1/(mu_j b_j) = sum_j Q_j / b_j after exchanging sums.
        let mut q = 0.0;
        let r = sum_series(
            |j| {
                q = if j == 0 { 1.0 } else { 1.0 + spec.death(j) / spec.birth(j - 1) * q };
                q / spec.birth(j)
            },
            tol,
        )?;
        Some(r.diverged)
    };
    let mut e = 0.0;
    let r = sum_series(
        |k| {
            let j = k + 1;
            if !in_range(spec, j) {
                return 0.0;
            }
            e = (spec.birth(j - 1) * e + 1.0) / spec.death(j);
            e
        },
        tol,
    )?;
    let s = (!r.diverged).then_some(r.value);
    Ok(EntranceVerdict {
        is_entrance: first_diverges.unwrap_or(true) && s.is_some(),
        first_diverges,
        s,
        s_error: r.error_estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SProfile {
    pub s: f64,
    /// `min_i max{S_i, Sbar_i}`; its inverse bounds `lambda1` from below.
    pub min_max: f64,
    /// First index where `Sbar_i >= S_i`.
    pub crossing: usize,
}

impl SProfile {
    pub fn lambda1_lower(&self) -> f64 {
        1.0 / self.min_max
    }
}

/// `S = S_0` and `min_i max{S_i, Sbar_i}`.
///
/// `S_i` decreases and `Sbar_i` increases in `i`, so the minimum of the
/// maximum sits at their crossing and no further scanning is needed.
pub fn bd_s_profile(spec: &BirthDeathSpec, tol: &Tolerance) -> Result<SProfile> {
    let s = s_tail(spec, 0, tol)?;
    let mut s_prev = s;
    let mut sbar = 0.0;
    let mut q = 0.0;
    for i in 1..SCAN_CAP {
        // Sbar_i = Sbar_{i-1} + Q_{i-1} / b_{i-1}.
        let k = i - 1;
        q = if k == 0 { 1.0 } else { 1.0 + spec.death(k) / spec.birth(k - 1) * q };
        sbar += q / spec.birth(k);
        let s_i = if in_range(spec, i) { s_tail(spec, i, tol)? } else { 0.0 };
        if sbar >= s_i {
            return Ok(SProfile {
                s,
                min_max: s_prev.min(sbar),
                crossing: i,
            });
        }
        s_prev = s_i;
    }
    Err(Error::Inconclusive(format!("S_i and Sbar_i did not cross within {SCAN_CAP} indices")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaScan {
    pub delta: f64,
    pub argmax: usize,
    /// Last index examined.
    pub scanned: usize,
    /// `delta_n + S_n` at the stopping index, a bound on every later `delta_m`.
    pub tail_majorant: f64,
}

/// `delta = sup_n (sum_{i>=n} mu_i)(sum_{i<n} 1/(mu_i b_i))`.
///
/// The scan stops once the running maximum has not moved for 64 indices and
/// `delta_n + S_n`, which dominates every `delta_m` with `m >= n`, no longer
/// exceeds it.
pub fn bd_delta(spec: &BirthDeathSpec, tol: &Tolerance) -> Result<DeltaScan> {
    let top = spec.states.map_or(SCAN_CAP, |n| n - 1);
    let mut e = 0.0;
    let mut best = (0.0f64, 0usize);
    for n in 1..=top {
        e = (spec.birth(n - 1) * e + 1.0) / spec.death(n);
        let d = tail_ratio(spec, n, tol)? * e;
        if !d.is_finite() {
            return Err(Error::Divergent(format!("delta_{n} is infinite")));
        }
        if d > best.0 {
            best = (d, n);
        }
        let idle = n - best.1;
        if idle >= SCAN_WINDOW && idle % SCAN_WINDOW == 0 {
            let majorant = d + s_tail(spec, n, tol)?;
            if majorant <= best.0 + tol.target(best.0) {
                return Ok(DeltaScan {
                    delta: best.0,
                    argmax: best.1,
                    scanned: n,
                    tail_majorant: majorant,
                });
            }
        }
    }
    if spec.states.is_some() {
        return Ok(DeltaScan {
            delta: best.0,
            argmax: best.1,
            scanned: top,
            tail_majorant: 0.0,
        });
    }
    Err(Error::Inconclusive(format!("delta scan did not settle within {SCAN_CAP} indices")))
}

/// `sup_{x > n} E_x tau_{0..n} = S_n`.
pub fn bd_hitting_moment(spec: &BirthDeathSpec, n: usize, tol: &Tolerance) -> Result<HittingSummary> {
    let m = if in_range(spec, n + 1) { s_tail(spec, n, tol)? } else { 0.0 };
    Ok(HittingSummary::new(format!("{{0..{n}}}"), m))
}

/// Smallest Rayleigh quotient of the indicators `1{i >= n}`, `1 <= n <= n_max`.
///
/// With `Z = sum mu`, `T_n = sum_{j>=n} mu_j` this is
/// `Z a_n / (R_n (Z - T_n))`, an upper bound on `lambda1`.
pub fn bd_step_upper(spec: &BirthDeathSpec, n_max: usize, tol: &Tolerance) -> Result<(f64, usize)> {
    let z = tail_ratio(spec, 0, tol)?;
    let top = spec.states.map_or(n_max, |n| n_max.min(n - 1));
    let mut prefix = 1.0; // sum_{j<n} mu_j
    let mut log_mu = 0.0;
    let mut best = (f64::INFINITY, 0usize);
    for n in 1..=top.max(1) {
        let u = z * spec.death(n) / (tail_ratio(spec, n, tol)? * prefix);
        if u < best.0 {
            best = (u, n);
        }
        log_mu += spec.birth(n - 1).ln() - spec.death(n).ln();
        prefix += log_mu.exp();
    }
    Ok(best)
}

/// Full bound record for an infinite chain with an entrance boundary, or a
/// finite chain.
pub fn bd_rate_bounds(spec: &BirthDeathSpec, tol: &Tolerance) -> Result<RateBounds> {
    let entrance = bd_entrance_boundary(spec, tol)?;
    if !entrance.is_entrance {
        let why = match (entrance.first_diverges, entrance.s) {
            (_, None) => "S is infinite",
            (Some(false), _) => "the first entrance series is finite",
            _ => "entrance conditions fail",
        };
        return Err(Error::Divergent(format!("not strongly ergodic: {why}")));
    }
    let delta = bd_delta(spec, tol)?;
    let profile = bd_s_profile(spec, tol)?;
    let (upper, upper_at) = bd_step_upper(spec, (2 * delta.scanned).max(2 * SCAN_WINDOW), tol)?;

    let mut b = RateBounds {
        s: Some(profile.s),
        delta: Some(delta.delta),
        ..Default::default()
    };
    let hardy = 0.25 / delta.delta;
    let hitting = profile.lambda1_lower();
    b.record("lambda1_lower", BoundSource::HardyDelta, hardy, Some(format!("delta attained at n={}", delta.argmax)));
    b.record(
        "lambda1_lower",
        BoundSource::HittingProfile,
        hitting,
        Some(format!("S_i and Sbar_i cross at i={}", profile.crossing)),
    );
    b.record("lambda1_lower", BoundSource::UniformHitting, 1.0 / profile.s, None);
    b.record("lambda1_upper", BoundSource::StepRayleigh, upper, Some(format!("indicator of {{i >= {upper_at}}}")));
    let lower = hardy.max(hitting);
    b.lambda1_lower = Some(lower);
    b.lambda1_upper = Some(upper);
    b.dirichlet_lower = Some(hardy);
    b.dirichlet_upper = Some(1.0 / delta.delta);
    b.record("dirichlet_upper", BoundSource::HardyDeltaDirichlet, 1.0 / delta.delta, None);

    // kappa = lambda1 once some S_n (the mean hitting time of {0..n}) is
    // below 1/upper >= 1/lambda1.
    let threshold = 1.0 / upper;
    let top = spec.states.map_or(SCAN_CAP, |n| n - 1);
    let mut certified = None;
    let mut last = (profile.s, 0usize);
    for n in 0..=top {
        let s_n = if n == 0 { profile.s } else { s_tail(spec, n, tol)? };
        last = (s_n, n);
        if s_n <= threshold {
            certified = Some((s_n, n));
            break;
        }
        if n >= 100_000 {
            break;
        }
    }
    match certified {
        Some((s_n, n)) => {
            b.kappa_equals_lambda1 = true;
            b.kappa_lower = lower;
            b.m_h = Some(s_n);
            b.hitting_set = Some(format!("{{0..{n}}}"));
            b.record("kappa_lower", BoundSource::HardyDelta, lower, Some(format!("kappa = lambda1 certified by S_{n} <= 1/upper")));
        }
        None => {
            let (kappa, _) = super::combine_bounds(lower, last.0)?;
            b.kappa_lower = kappa;
            b.m_h = Some(last.0);
            b.hitting_set = Some(format!("{{0..{}}}", last.1));
            b.record("kappa_lower", BoundSource::Combination, kappa, None);
            b.notes.push("kappa = lambda1 could not be certified; reporting min{lambda1_lower, 1/M_H}".into());
        }
    }
    b.check()?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn quad() -> BirthDeathSpec {
        BirthDeathSpec::from_text("1", "(i+1)^2", None).unwrap()
    }

    #[test]
    fn weights() {
        let walk = BirthDeathSpec::from_text("1", "1", None).unwrap();
        assert_eq!(bd_mu(&walk, 5).unwrap(), 1.0);
        let sq = BirthDeathSpec::from_text("1", "i^2", None).unwrap();
        assert_relative_eq!(bd_mu(&sq, 3).unwrap(), 1.0 / 36.0, max_relative = 1e-14);
        let up = BirthDeathSpec::from_text("2", "1", None).unwrap();
        assert_relative_eq!(bd_mu(&up, 4).unwrap(), 16.0, max_relative = 1e-14);
        assert_eq!(bd_mu(&up, 0).unwrap(), 1.0);
        assert!(bd_mu(&up, 2000).is_err());
    }

    #[test]
    fn entrance_verdicts() {
        let v = bd_entrance_boundary(&quad(), &tol()).unwrap();
        assert!(v.is_entrance);
        assert_eq!(v.first_diverges, Some(true));
        let walk = BirthDeathSpec::from_text("1", "1", None).unwrap();
        let v = bd_entrance_boundary(&walk, &tol()).unwrap();
        assert!(!v.is_entrance && v.s.is_none());
        // Transient drift: both series are infinite, so no entrance boundary.
        let up = BirthDeathSpec::from_text("2", "1", None).unwrap();
        let v = bd_entrance_boundary(&up, &tol()).unwrap();
        assert!(!v.is_entrance && v.s.is_none());
        assert!(bd_rate_bounds(&walk, &tol()).unwrap_err().is_divergence());
    }

    #[test]
    fn two_state_chain() {
        let two = BirthDeathSpec::from_text("1", "1", Some(2)).unwrap();
        let p = bd_s_profile(&two, &tol()).unwrap();
        assert_eq!(p.s, 1.0);
        let d = bd_delta(&two, &tol()).unwrap();
        assert_eq!(d.delta, 1.0);
        let (u, _) = bd_step_upper(&two, 10, &tol()).unwrap();
        assert_relative_eq!(u, 2.0, max_relative = 1e-14);
        let b = bd_rate_bounds(&two, &tol()).unwrap();
        assert!(b.kappa_equals_lambda1);
        assert!(b.lambda1_lower.unwrap() <= 2.0 && b.lambda1_upper.unwrap() >= 2.0);
    }

    #[test]
    fn s_against_brute_force() {
        // Direct double sum with mu in closed form: mu_j = 1/((j+1)!)^2.
        let spec = quad();
        let n = 60;
        let mu: Vec<f64> = (0..n).map(|j| bd_mu(&spec, j).unwrap()).collect();
        let mut s = 0.0;
        for k in 0..n - 1 {
            let tail: f64 = mu[k + 1..].iter().sum();
            s += tail / mu[k];
        }
        let p = bd_s_profile(&spec, &tol()).unwrap();
        // Terms decay like 1/k^2, so the 60-term brute force misses ~1/60 of tail.
        let tail_bound = 1.0 / (n as f64 - 1.0);
        assert!(p.s >= s && p.s <= s + tail_bound, "{} vs {}", p.s, s);
        // S_n decreasing, S_0 = S.
        let m0 = bd_hitting_moment(&spec, 0, &tol()).unwrap().moment1;
        assert_relative_eq!(m0, p.s, max_relative = 1e-12);
        let mut prev = m0;
        for k in 1..20 {
            let m = bd_hitting_moment(&spec, k, &tol()).unwrap().moment1;
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn summands_add_up_to_s() {
        let spec = quad();
        let s = bd_s_profile(&spec, &tol()).unwrap().s;
        let mut i = 0;
        let r = sum_series(
            |_| {
                i += 1;
                bd_s_summand(&spec, i, &tol()).unwrap()
            },
            &tol(),
        )
        .unwrap();
        assert_relative_eq!(r.value, s, max_relative = 1e-8);
    }

    #[test]
    fn delta_for_quadratic_deaths() {
        let d = bd_delta(&quad(), &tol()).unwrap();
        assert_relative_eq!(d.delta, 0.279_585_3, max_relative = 1e-6);
        assert!(d.tail_majorant <= d.delta * (1.0 + 1e-9));
    }

    #[test]
    fn homogeneity() {
        let spec = quad();
        let scaled = spec.scaled(2.0);
        let a = bd_rate_bounds(&spec, &tol()).unwrap();
        let b = bd_rate_bounds(&scaled, &tol()).unwrap();
        assert_relative_eq!(b.s.unwrap(), a.s.unwrap() / 2.0, max_relative = 1e-9);
        assert_relative_eq!(b.delta.unwrap(), a.delta.unwrap() / 2.0, max_relative = 1e-9);
        assert_relative_eq!(b.kappa_lower, 2.0 * a.kappa_lower, max_relative = 1e-9);
        assert_relative_eq!(b.lambda1_upper.unwrap(), 2.0 * a.lambda1_upper.unwrap(), max_relative = 1e-9);
        let pa = bd_s_profile(&spec, &tol()).unwrap();
        let pb = bd_s_profile(&scaled, &tol()).unwrap();
        assert_relative_eq!(pb.min_max, pa.min_max / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn certification_found() {
        let b = bd_rate_bounds(&quad(), &tol()).unwrap();
        assert!(b.kappa_equals_lambda1);
        assert!(b.m_h.unwrap() <= 1.0 / b.lambda1_upper.unwrap());
        assert!(b.lambda1_lower.unwrap() <= b.lambda1_upper.unwrap());
    }
}
