//! Summation of positive series with tail estimates and divergence verdicts.
//!
//! Terms are consumed in order `0, 1, 2, ...` (callers may keep recursion
//! state inside the closure). At checkpoints the partial sum is completed
//! with a tail model fitted to the latest terms:
//!
//! * zero tail when the latest half of the terms vanished;
//! * geometric tail `t rho / (1 - rho)` when the term ratio is below one and
//!   not increasing, which makes it a majorant;
//! * power tail `C (n + s + 1/2)^(1-p) / (p - 1)` for terms decaying like
//!   `C (m + s)^(-p)` (indices counted from one).
//!
//! The error estimate is the change of the completed value between
//! consecutive checkpoints, plus a rounding allowance.

use serde::Serialize;

use super::{CompensatedSum, Tolerance};
use crate::{Error, Result};

/// How to recognise divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceRule {
    /// Terms indexed by integers: divergent when the fitted power exponent
    /// stays `<= 1` or the terms stop decreasing.
    PowerLaw,
    /// Terms are integrals over dyadic panels `[2^(k-1), 2^k]`: divergent
    /// when the panel values decay slower than `2^(-0.02 k)`, i.e. the
    /// integrand decays no faster than `x^(-1.02)`.
    Dyadic,
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions {
    pub rule: DivergenceRule,
    /// Partial sums above this, with non-decreasing terms, mean divergence.
    pub blowup: f64,
    /// Terms before the first checkpoint.
    pub first_checkpoint: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            rule: DivergenceRule::PowerLaw,
            blowup: 1e12,
            first_checkpoint: 16,
        }
    }
}

impl SeriesOptions {
    pub fn dyadic() -> Self {
        SeriesOptions {
            rule: DivergenceRule::Dyadic,
            blowup: 1e12,
            first_checkpoint: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    /// Set when the series was judged infinite; `value` is then `+inf`.
    pub diverged: bool,
    pub terms: usize,
}

impl SeriesResult {
    fn divergent(terms: usize) -> Self {
        SeriesResult {
            value: f64::INFINITY,
            error_estimate: f64::INFINITY,
            converged: false,
            diverged: true,
            terms,
        }
    }

    /// The value, or a divergence error naming `what`.
    pub fn finite(&self, what: &str) -> Result<f64> {
        if self.diverged {
            Err(Error::Divergent(format!("{what} diverges (after {} terms)", self.terms)))
        } else {
            Ok(self.value)
        }
    }
}

/// Power-law exponents at or below this are treated as divergent.
const POWER_DIVERGENCE: f64 = 1.001;
/// Terms needed before a power-law divergence verdict.
const POWER_VERDICT_MIN: usize = 4096;
/// Terms needed before a non-decreasing tail alone means divergence.
const MONOTONE_VERDICT_MIN: usize = 65536;
/// Panel count before a dyadic divergence verdict, and the decay threshold.
const DYADIC_VERDICT_MIN: usize = 48;
const DYADIC_MIN_DECAY: f64 = 0.02;

/// Sums `term(0) + term(1) + ...` with the default (integer-index) rule.
pub fn sum_series(term: impl FnMut(usize) -> f64, tol: &Tolerance) -> Result<SeriesResult> {
    sum_series_with(term, tol, SeriesOptions::default())
}

pub fn sum_series_with(mut term: impl FnMut(usize) -> f64, tol: &Tolerance, opts: SeriesOptions) -> Result<SeriesResult> {
    tol.validate()?;
    let mut acc = CompensatedSum::default();
    let mut abs_acc = 0.0f64;
    let mut terms: Vec<f64> = Vec::new();
    let mut next = opts.first_checkpoint.max(4);
    let mut prev_completed: Option<f64> = None;
    let mut last_decrease = 0usize;
    let mut weak_power = 0usize;

    for n in 0..tol.max_terms {
        let t = term(n);
        if t.is_nan() || t == f64::NEG_INFINITY {
            return Err(Error::NonFinite {
                value: t,
                at: format!("series term {n}"),
            });
        }
        if t == f64::INFINITY {
            return Ok(SeriesResult::divergent(n + 1));
        }
        if n > 0 && t < terms[n - 1] {
            last_decrease = n;
        }
        terms.push(t);
        acc.add(t);
        abs_acc += t.abs();
        let count = n + 1;
        if count < next {
            continue;
        }
        next = match opts.rule {
            DivergenceRule::PowerLaw => count * 2,
            DivergenceRule::Dyadic => count + 4,
        };

        let partial = acc.value();
        let half = match opts.rule {
            DivergenceRule::PowerLaw => count / 2,
            DivergenceRule::Dyadic => count.saturating_sub(8).max(1),
        };
        let window = &terms[half..count];
        let nondecreasing = last_decrease < half;
        if nondecreasing && partial > opts.blowup {
            return Ok(SeriesResult::divergent(count));
        }

        let all_positive = window.iter().all(|&v| v > 0.0);
        let mut tail: Option<f64> = None;
        if window.iter().all(|&v| v == 0.0) {
            tail = Some(0.0);
        } else if all_positive && terms[half - 1] > 0.0 {
            let t1 = terms[count - 1];
            let rho_end = t1 / terms[count - 2];
            let rho_mid = terms[half] / terms[half - 1];
            match opts.rule {
                DivergenceRule::PowerLaw => {
                    // Exponent from t(m) ~ C m^(-p) at m = half and m = count.
                    let p = (terms[half - 1] / t1).ln() / 2f64.ln();
                    if rho_end < 1.0 && rho_end <= rho_mid * (1.0 + 1e-12) && (p > 8.0 || rho_end < 0.5) {
                        tail = Some(t1 * rho_end / (1.0 - rho_end));
                    } else if p > POWER_DIVERGENCE {
                        tail = Some(power_tail(&terms[..count]));
                    } else if rho_end < 1.0 && rho_end <= rho_mid * (1.0 + 1e-12) {
                        tail = Some(t1 * rho_end / (1.0 - rho_end));
                    }
                    if p <= POWER_DIVERGENCE && count >= POWER_VERDICT_MIN {
                        weak_power += 1;
                        if weak_power >= 2 {
                            return Ok(SeriesResult::divergent(count));
                        }
                    } else {
                        weak_power = 0;
                    }
                    if nondecreasing && count >= MONOTONE_VERDICT_MIN {
                        return Ok(SeriesResult::divergent(count));
                    }
                }
                DivergenceRule::Dyadic => {
                    if count >= DYADIC_VERDICT_MIN {
                        let back = terms[count - 17];
                        let decay = (back / t1).log2() / 16.0;
                        if back > 0.0 && decay < DYADIC_MIN_DECAY {
                            return Ok(SeriesResult::divergent(count));
                        }
                    }
                    if rho_end < 1.0 {
                        tail = Some(t1 * rho_end / (1.0 - rho_end));
                    }
                }
            }
        } else if !all_positive {
            // Mixed signs or interior zeros: no tail model, rely on stagnation.
            tail = Some(0.0);
        }

        let Some(tail) = tail else {
            prev_completed = None;
            continue;
        };
        let completed = partial + tail;
        let rounding = 4.0 * f64::EPSILON * (abs_acc + tail.abs());
        if let Some(prev) = prev_completed {
            let err = (completed - prev).abs() + rounding;
            if err <= tol.target(completed) {
                return Ok(SeriesResult {
                    value: completed,
                    error_estimate: err,
                    converged: true,
                    diverged: false,
                    terms: count,
                });
            }
        }
        prev_completed = Some(completed);
    }
    let partial = acc.value();
    Err(Error::CapExhausted {
        cap: tol.max_terms,
        partial,
        error: prev_completed.map_or(f64::INFINITY, |p| (p - partial).abs()),
    })
}

/// Tail beyond the last term for terms decaying like `C (m + s)^(-p)`
/// (`m` counted from one), with `s` and `p` fitted through the terms at
/// `m = count/4, count/2, count`. The shift absorbs the index offset of
/// sequences such as `1/(m + 60)^2`, which a pure power fit would only
/// resolve to relative accuracy `O(60/count)`.
fn power_tail(terms: &[f64]) -> f64 {
    let count = terms.len();
    let m = |k: usize| k as f64;
    let (ma, mb, mc) = (m(count / 4), m(count / 2), m(count));
    let (ta, tb, tc) = (terms[count / 4 - 1], terms[count / 2 - 1], terms[count - 1]);
    let (la, lb) = ((ta / tb).ln(), (tb / tc).ln());
    // Equal exponents on both halves: la ln((mc+s)/(mb+s)) = lb ln((mb+s)/(ma+s)).
    let mismatch = |s: f64| la * ((mc + s) / (mb + s)).ln() - lb * ((mb + s) / (ma + s)).ln();
    let mut shift = 0.0;
    let (mut lo, mut hi) = (0.5 - ma, 1e6 * mc);
    let (flo, fhi) = (mismatch(lo), mismatch(hi));
    if flo.is_finite() && fhi.is_finite() && flo.signum() != fhi.signum() {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mismatch(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        shift = 0.5 * (lo + hi);
    }
    let p = lb / ((mc + shift) / (mb + shift)).ln();
    if !(p > POWER_DIVERGENCE) || !p.is_finite() {
        shift = 0.0;
    }
    let p = lb / ((mc + shift) / (mb + shift)).ln();
    let c = tc * (mc + shift).powf(p);
    c * (mc + 0.5 + shift).powf(1.0 - p) / (p - 1.0)
}

/// Compensated sum of a finite slice.
pub fn sum_prefix(terms: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &t in terms {
        acc.add(t);
    }
    acc.value()
}
