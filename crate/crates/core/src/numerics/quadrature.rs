//! Adaptive Gauss-Kronrod quadrature on finite and semi-infinite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::series::{sum_series_with, SeriesOptions};
use super::Tolerance;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evals: usize,
}

// 21-point Kronrod nodes on [0, 1] (symmetric), with the embedded 10-point
// Gauss weights on the odd-indexed nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_632_405_458_789,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 21-point Kronrod rule with the QUADPACK error scaling.
fn gk21(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0f64; 21];
    for (k, &x) in XGK.iter().enumerate() {
        if k == 10 {
            fv[10] = f(center);
        } else {
            fv[k] = f(center - half * x);
            fv[20 - k] = f(center + half * x);
        }
    }
    for (k, &v) in fv.iter().enumerate() {
        if v.is_nan() || v == f64::NEG_INFINITY {
            let x = if k <= 10 { center - half * XGK[k] } else { center + half * XGK[20 - k] };
            return Err(Error::NonFinite {
                value: v,
                at: format!("integrand at x={x}"),
            });
        }
        if v == f64::INFINITY {
            let x = if k <= 10 { center - half * XGK[k] } else { center + half * XGK[20 - k] };
            return Err(Error::Divergent(format!("integrand overflows at x={x}")));
        }
    }
    let mut resk = WGK[10] * fv[10];
    let mut resg = 0.0;
    for k in 0..10 {
        let pair = fv[k] + fv[20 - k];
        resk += WGK[k] * pair;
        if k % 2 == 1 {
            resg += WG[k / 2] * pair;
        }
    }
    let mean = 0.5 * resk;
    let mut asc = WGK[10] * (fv[10] - mean).abs();
    let mut abs_k = WGK[10] * fv[10].abs();
    for k in 0..10 {
        asc += WGK[k] * ((fv[k] - mean).abs() + (fv[20 - k] - mean).abs());
        abs_k += WGK[k] * (fv[k].abs() + fv[20 - k].abs());
    }
    let h = half.abs();
    let (resk, resg, asc, abs_k) = (resk * half, resg * half, asc * h, abs_k * h);
    let mut err = (resk - resg).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * abs_k;
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(round);
    }
    Ok(Segment {
        a,
        b,
        value: resk,
        error: err,
    })
}

fn adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: &Tolerance) -> Result<QuadratureResult> {
    tol.validate()?;
    let first = gk21(&mut f, a, b)?;
    let mut evals = 21;
    let mut heap = BinaryHeap::new();
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    loop {
        if error <= tol.target(value) {
            return Ok(QuadratureResult {
                value,
                error_estimate: error,
                converged: true,
                evals,
            });
        }
        if evals + 42 > tol.max_evals {
            return Err(Error::CapExhausted {
                cap: tol.max_evals,
                partial: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a.min(worst.b) && mid < worst.a.max(worst.b)) {
            // Interval cannot be split further in floating point; accept it.
            return Ok(QuadratureResult {
                value,
                error_estimate: error,
                converged: false,
                evals,
            });
        }
        let left = gk21(&mut f, worst.a, mid)?;
        let right = gk21(&mut f, mid, worst.b)?;
        evals += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Re-sum periodically to keep the running totals from drifting.
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// Integrates `f` over `[a, b]`; `b` may be `+inf`, handled by the
/// substitution `x = a + t / (1 - t)` on `t in [0, 1)`.
///
/// An integrand value of `+inf` is reported as [`Error::Divergent`].
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: &Tolerance) -> Result<QuadratureResult> {
    if a.is_nan() || b.is_nan() || a.is_infinite() {
        return Err(Error::invalid(format!("bad integration range [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            converged: true,
            evals: 0,
        });
    }
    if b == f64::INFINITY {
        let g = move |t: f64| {
            let s = 1.0 - t;
            let v = f(a + t / s);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        };
        return adaptive(g, 0.0, 1.0, tol);
    }
    if b == f64::NEG_INFINITY {
        return Err(Error::invalid("integration towards -inf is not supported; reflect the integrand"));
    }
    adaptive(f, a, b, tol)
}

/// Integrates over `[a, inf)` panel by panel (`[a, a+1]`, then
/// `[a + 2^(k-1), a + 2^k]`) and sums the panels as a series, so a divergent
/// integral yields a verdict instead of a meaningless number.
pub fn integrate_checked(mut f: impl FnMut(f64) -> f64, a: f64, tol: &Tolerance) -> Result<QuadratureResult> {
    let panel_tol = tol.scaled(0.1);
    let mut evals = 0usize;
    let mut failure: Option<Error> = None;
    let mut overflowed = false;
    let result = sum_series_with(
        |k| {
            if failure.is_some() {
                return 0.0;
            }
            let (lo, hi) = if k == 0 {
                (a, a + 1.0)
            } else {
                (a + 2f64.powi(k as i32 - 1), a + 2f64.powi(k as i32))
            };
            if !hi.is_finite() {
                overflowed = true;
                return f64::INFINITY;
            }
            match integrate(&mut f, lo, hi, &panel_tol) {
                Ok(r) => {
                    evals += r.evals;
                    r.value
                }
                Err(Error::Divergent(_)) => f64::INFINITY,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        tol,
        SeriesOptions::dyadic(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let r = result?;
    if r.diverged {
        let why = if overflowed { "panels exceeded the floating-point range" } else { "integral over [a, inf) diverges" };
        return Err(Error::Divergent(why.into()));
    }
    Ok(QuadratureResult {
        value: r.value,
        error_estimate: r.error_estimate,
        converged: r.converged,
        evals,
    })
}
