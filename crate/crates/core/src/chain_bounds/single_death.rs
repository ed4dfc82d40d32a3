//! Single-death chains: one step down, arbitrary jumps up.
//!
//! With `q_n^{(k)} = sum_{j >= k} q_{nj}` the defining recursion
//! `G_n^{(n)} = 1`, `G_n^{(i)} = q_{n,n-1}^{-1} sum_{k=n+1}^{i} q_n^{(k)} G_k^{(i)}`
//! gives the hitting series `S = sum_{k>=1} sum_{l>=k} G_k^{(l)} / q_{l,l-1}`.
//!
//! Writing `A_{nk} = q_n^{(k)} / q_{n,n-1}` for `k > n`, the matrix `G` is
//! `(I - A)^{-1}` and is upper triangular, so the column sums
//! `F_l = sum_{k<=l} G_k^{(l)}` satisfy the forward recursion
//! `F_l = 1 + sum_{m<l} A_{ml} F_m`. Only `m >= l - w` contribute when jumps
//! are bounded by `w`, which makes `S = sum_l F_l / q_{l,l-1}` a single series.

use std::collections::{HashMap, VecDeque};

use super::{combine_bounds, BoundSource, HittingSummary, RateBounds};
use crate::model::SingleDeathSpec;
use crate::numerics::{sum_series, Tolerance};
use crate::{Error, Result};

/// Memo table for [`sd_g`], keyed by `(n, i)`.
#[derive(Debug, Default, Clone)]
pub struct GMemo {
    table: HashMap<(usize, usize), f64>,
}

impl GMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// `G_n^{(i)}` for `1 <= n <= i`.
pub fn sd_g(spec: &SingleDeathSpec, n: usize, i: usize, memo: &mut GMemo) -> Result<f64> {
    if n == 0 || n > i {
        return Err(Error::invalid(format!("G_n^(i) needs 1 <= n <= i, got n={n}, i={i}")));
    }
    if let Some(&v) = memo.table.get(&(n, i)) {
        return Ok(v);
    }
    // Fill G_k^{(i)} for k = i, i-1, ..., n; each needs only larger k.
    let w = spec.max_jump();
    for k in (n..=i).rev() {
        if memo.table.contains_key(&(k, i)) {
            continue;
        }
        let value = if k == i {
            1.0
        } else {
            let down = spec.down(k);
            let mut acc = 0.0;
            for m in k + 1..=i.min(k + w) {
                let up = spec.up_tail(k, m);
                if up > 0.0 {
                    acc += up * memo.table[&(m, i)];
                }
            }
            let v = acc / down;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    value: v,
                    at: format!("G_{k}^({i})"),
                });
            }
            v
        };
        memo.table.insert((k, i), value);
    }
    Ok(memo.table[&(n, i)])
}

/// Rows kept for the forward recursion: `(m, F_m, q_{m,m-1}, row m)`.
type Window = VecDeque<(usize, f64, f64, Vec<(usize, f64)>)>;

/// `sum_{k > n} sum_{l >= k} G_k^{(l)} / q_{l,l-1}`, a bound on
/// `sup_{i > n} E_i tau_{{0..n}}`; `n = 0` gives `S`.
fn s_from(spec: &SingleDeathSpec, n: usize, tol: &Tolerance) -> Result<f64> {
    let w = spec.max_jump().max(1);
    let top = if spec.is_finite() { Some(spec.dimension) } else { None };
    let mut window: Window = VecDeque::with_capacity(w + 1);
    let mut bad: Option<Error> = None;
    let r = sum_series(
        |k| {
            let l = n + 1 + k;
            if top.map_or(false, |t| l >= t) || bad.is_some() {
                return 0.0;
            }
            let mut f = 1.0;
            for (m, fm, down_m, row) in window.iter() {
                if *m + w < l {
                    continue;
                }
                let up: f64 = row.iter().filter(|e| e.0 >= l).map(|e| e.1).sum();
                f += up / down_m * fm;
            }
            let down = spec.down(l);
            if !(down > 0.0) {
                bad = Some(Error::invariant("q[l][l-1] must be positive", format!("l={l}")));
                return 0.0;
            }
            window.push_back((l, f, down, spec.row(l)));
            while window.len() > w {
                window.pop_front();
            }
            f / down
        },
        tol,
    )?;
    if let Some(e) = bad {
        return Err(e);
    }
    r.finite(&format!("single-death hitting series above {n}"))
}

/// `S`; finite means strongly ergodic.
pub fn sd_s(spec: &SingleDeathSpec, tol: &Tolerance) -> Result<f64> {
    s_from(spec, 0, tol)
}

/// Bound on `sup_{i > n} E_i tau_{{0..n}}`.
pub fn sd_hitting_bound(spec: &SingleDeathSpec, n: usize, tol: &Tolerance) -> Result<HittingSummary> {
    Ok(HittingSummary::new(format!("{{0..{n}}}"), s_from(spec, n, tol)?))
}

/// Bound record for a single-death chain.
///
/// A finite `S` gives strong ergodicity and `kappa = lambda1`, but no number
/// for `lambda1` itself. When the caller supplies a lower bound on `lambda1`
/// it is combined with the hitting bound of the smallest `{0..n}` certifying
/// `lambda1_lower <= 1/M`; otherwise `kappa_lower` stays 0.
pub fn sd_rate_bounds(spec: &SingleDeathSpec, tol: &Tolerance, lambda1_lower: Option<f64>) -> Result<RateBounds> {
    let s = sd_s(spec, tol)?;
    let mut b = RateBounds {
        s: Some(s),
        m_h: Some(s),
        hitting_set: Some("{0}".into()),
        kappa_equals_lambda1: true,
        ..Default::default()
    };
    b.notes.push("S is finite, so the chain is strongly ergodic and kappa = lambda1".into());
    let Some(lambda) = lambda1_lower else {
        b.notes.push("no lambda1 estimate supplied; kappa_lower is left at 0".into());
        return Ok(b);
    };
    b.lambda1_lower = Some(lambda);
    b.record("lambda1_lower", BoundSource::External, lambda, None);
    let mut n = 0;
    let mut m = s;
    let cap = spec.dimension.max(1) * 4 + 1024;
    while m > 1.0 / lambda && n < cap && (spec.is_finite() && n + 1 < spec.dimension || !spec.is_finite()) {
        n += 1;
        m = s_from(spec, n, tol)?;
    }
    let (kappa, _) = combine_bounds(lambda, m.max(f64::MIN_POSITIVE))?;
    b.kappa_lower = kappa;
    b.m_h = Some(m);
    b.hitting_set = Some(format!("{{0..{n}}}"));
    b.record("kappa_lower", BoundSource::Combination, kappa, Some(format!("M_H for H = {{0..{n}}} is {m}")));
    b.check()?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_bounds::bd_s_profile;
    use crate::model::{BirthDeathSpec, SingleDeathTail};
    use crate::oracle::{hitting_moments, truncate_single_death};
    use crate::model::RateFunction;
    use approx::assert_relative_eq;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn g_base_cases_and_products() {
        let bd = BirthDeathSpec::from_text("1 + i/3", "(i+1)^2", None).unwrap();
        let sd = SingleDeathSpec::from_birth_death(&bd, 10).unwrap();
        let mut memo = GMemo::new();
        assert_eq!(sd_g(&sd, 4, 4, &mut memo).unwrap(), 1.0);
        // One-step case: G_n^(n+1) = q_n^(n+1) / q_{n,n-1}.
        assert_relative_eq!(sd_g(&sd, 3, 4, &mut memo).unwrap(), bd.birth(3) / bd.death(3), max_relative = 1e-15);
        // Birth-death: G_n^(i) = prod_{j=n}^{i-1} b_j / a_j.
        for (n, i) in [(1, 5), (2, 9), (3, 12)] {
            let direct: f64 = (n..i).map(|j| bd.birth(j) / bd.death(j)).product();
            assert_relative_eq!(sd_g(&sd, n, i, &mut memo).unwrap(), direct, max_relative = 1e-13);
        }
        assert!(sd_g(&sd, 0, 3, &mut memo).is_err());
    }

    #[test]
    fn forward_recursion_matches_double_sum() {
        // Jumps of length up to 3 with a polynomial tail.
        let tail = SingleDeathTail {
            down: RateFunction::parse("i^2", "i").unwrap(),
            up: vec![
                RateFunction::parse("1", "i").unwrap(),
                RateFunction::parse("0.5", "i").unwrap(),
                RateFunction::parse("0.25", "i").unwrap(),
            ],
        };
        let sd = SingleDeathSpec::new(2, &[(0, 1, 1.0), (0, 3, 1.0), (1, 0, 1.0), (1, 2, 2.0)], Some(tail)).unwrap();
        let mut memo = GMemo::new();
        let cutoff = 400;
        let mut direct = 0.0;
        for l in 1..=cutoff {
            let mut col = 0.0;
            for k in 1..=l {
                col += sd_g(&sd, k, l, &mut memo).unwrap();
            }
            direct += col / sd.down(l);
        }
        let s = sd_s(&sd, &tol()).unwrap();
        // Column sums grow at most linearly, so the tail past the cutoff is O(1/cutoff).
        assert!(s >= direct && s - direct < 10.0 / cutoff as f64, "{s} vs {direct}");
    }

    #[test]
    fn embedding_of_birth_death() {
        for (b, a) in [("1", "(i+1)^2"), ("2 + i", "i^2 + 1"), ("1", "i^1.5 + i^3")] {
            let bd = BirthDeathSpec::from_text(b, a, None).unwrap();
            let sd = SingleDeathSpec::from_birth_death(&bd, 5).unwrap();
            let s_bd = bd_s_profile(&bd, &tol()).unwrap().s;
            let s_sd = sd_s(&sd, &tol()).unwrap();
            assert!((s_sd - s_bd).abs() <= 1e-8 * (1.0 + s_bd), "{b}/{a}: {s_sd} vs {s_bd}");
        }
    }

    #[test]
    fn pure_death_chain_hitting_times() {
        // Finite chain 0..5 with q_{i,i-1} = i^2 and no up jumps:
        // E_i tau_0 = sum_{k<=i} 1/k^2 and S equals its maximum.
        let table: Vec<(usize, usize, f64)> = (1..6).map(|i| (i, i - 1, (i * i) as f64)).collect();
        let sd = SingleDeathSpec::new(6, &table, None).unwrap();
        let s = sd_s(&sd, &tol()).unwrap();
        let exact: f64 = (1..6).map(|k| 1.0 / (k * k) as f64).sum();
        assert_relative_eq!(s, exact, max_relative = 1e-14);
        let g = truncate_single_death(&sd, 6).unwrap_err();
        // No up jumps makes the chain reducible (0 is absorbing).
        assert!(matches!(g, Error::Reducible(_)));
    }

    #[test]
    fn hitting_bound_dominates_oracle() {
        let tail = SingleDeathTail {
            down: RateFunction::parse("i^2", "i").unwrap(),
            up: vec![RateFunction::parse("1", "i").unwrap(), RateFunction::parse("1", "i").unwrap()],
        };
        let sd = SingleDeathSpec::new(1, &[(0, 1, 1.0), (0, 2, 1.0)], Some(tail)).unwrap();
        let g = truncate_single_death(&sd, 60).unwrap();
        for n in [0, 2, 5] {
            let bound = sd_hitting_bound(&sd, n, &tol()).unwrap().moment1;
            let target: Vec<usize> = (0..=n).collect();
            let u = hitting_moments(&g, &target, 1).unwrap();
            let worst = u.iter().copied().fold(0.0, f64::max);
            assert!(worst <= bound * (1.0 + 1e-9), "n={n}: {worst} > {bound}");
        }
    }

    #[test]
    fn homogeneity_and_bounds() {
        let bd = BirthDeathSpec::from_text("1", "(i+1)^2", None).unwrap();
        let sd = SingleDeathSpec::from_birth_death(&bd, 4).unwrap();
        let s = sd_s(&sd, &tol()).unwrap();
        assert_relative_eq!(sd_s(&sd.scaled(3.0), &tol()).unwrap(), s / 3.0, max_relative = 1e-10);
        let b = sd_rate_bounds(&sd, &tol(), None).unwrap();
        assert_eq!(b.kappa_lower, 0.0);
        let b = sd_rate_bounds(&sd, &tol(), Some(2.0)).unwrap();
        assert!(b.kappa_lower > 0.0 && b.kappa_lower <= 2.0);
        let walk = SingleDeathSpec::from_birth_death(&BirthDeathSpec::from_text("1", "1", None).unwrap(), 3).unwrap();
        assert!(sd_s(&walk, &tol()).unwrap_err().is_divergence());
    }
}
