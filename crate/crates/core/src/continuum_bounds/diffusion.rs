//! One-dimensional diffusions `L = a d^2/dx^2 + b d/dx` on `[0, inf)`,
//! reflecting at 0.
//!
//! With `c(x) = ∫_1^x b/a`, every quantity is a product of a scale integral
//! (density `e^{-c}`) and a speed integral (density `e^c / a`). They are
//! evaluated in relative form, e.g. the speed tail
//! `T(y) = e^{-c(y)} ∫_y^inf e^{c(z)} / a(z) dz = ∫_y^inf exp(∫_y^z b/a) / a(z) dz`,
//! so neither the base point nor the size of `c` matters numerically.

use serde::Serialize;

use super::exp_integral::ExpIntegrand;
use crate::chain_bounds::{combine_bounds, BoundSource, RateBounds};
use crate::model::DiffusionSpec;
use crate::numerics::{integrate, integrate_checked, Tolerance};
use crate::{Error, Result};

/// Grid points scanned before the first tail test in [`diff_delta`].
const SCAN_WINDOW: usize = 64;
/// Largest `x` the `delta` scan visits.
const SCAN_LIMIT: f64 = 1e8;

fn ratio(spec: &DiffusionSpec) -> impl Fn(f64) -> f64 + '_ {
    move |x| spec.b.eval(x) / spec.a.eval(x)
}

fn inv_a(spec: &DiffusionSpec) -> impl Fn(f64) -> f64 + '_ {
    move |x| 1.0 / spec.a.eval(x)
}

/// `c(x) = ∫_1^x b(y)/a(y) dy`.
pub fn diff_c(spec: &DiffusionSpec, x: f64, tol: &Tolerance) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("c(x) needs a finite x >= 0, got {x}")));
    }
    let g = ratio(spec);
    if x >= 1.0 {
        Ok(integrate(&g, 1.0, x, tol)?.value)
    } else {
        Ok(-integrate(&g, x, 1.0, tol)?.value)
    }
}

/// `∫_y^inf exp(c(z) - c(y)) / a(z) dz`.
pub fn speed_tail(spec: &DiffusionSpec, y: f64, tol: &Tolerance) -> Result<f64> {
    ExpIntegrand {
        g: ratio(spec),
        w: inv_a(spec),
        sign: 1.0,
    }
    .to_infinity(y, tol)
}

/// `∫_0^y exp(c(z) - c(y)) / a(z) dz`.
pub fn speed_head(spec: &DiffusionSpec, y: f64) -> Result<f64> {
    ExpIntegrand {
        g: ratio(spec),
        w: inv_a(spec),
        sign: 1.0,
    }
    .finite(y, 0.0)
}

/// `∫_0^x exp(c(x) - c(y)) dy`.
pub fn scale_head(spec: &DiffusionSpec, x: f64) -> Result<f64> {
    ExpIntegrand {
        g: ratio(spec),
        w: |_| 1.0,
        sign: -1.0,
    }
    .finite(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionEntrance {
    pub is_entrance: bool,
    /// `∫_0^inf e^{-c(y)} ∫_0^y e^{c}/a` diverges.
    pub first_diverges: bool,
    /// `M_0 = ∫_0^inf e^{-c(y)} ∫_y^inf e^{c}/a`, when finite.
    pub m0: Option<f64>,
}

/// The two entrance-boundary integrals at infinity.
pub fn diff_entrance(spec: &DiffusionSpec, tol: &Tolerance) -> Result<DiffusionEntrance> {
    let first = integrate_checked(|y| speed_head(spec, y).unwrap_or(f64::NAN), 0.0, tol);
    let first_diverges = match first {
        Ok(_) => false,
        Err(e) if e.is_divergence() => true,
        Err(e) => return Err(e),
    };
    let m0 = match diff_mr(spec, 0.0, tol) {
        Ok(v) => Some(v),
        Err(e) if e.is_divergence() => None,
        Err(e) => return Err(e),
    };
    Ok(DiffusionEntrance {
        is_entrance: first_diverges && m0.is_some(),
        first_diverges,
        m0,
    })
}

/// `M_r = sup_{x>r} E_x tau_[0,r] = ∫_r^inf e^{-c(y)} ∫_y^inf e^{c(z)}/a(z) dz dy`.
pub fn diff_mr(spec: &DiffusionSpec, r: f64, tol: &Tolerance) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("level r must be finite and >= 0, got {r}")));
    }
    let inner = tol.scaled(0.1);
    let mut failure = None;
    let out = integrate_checked(
        |y| match speed_tail(spec, y, &inner) {
            Ok(v) => v,
            Err(e) if e.is_divergence() => f64::INFINITY,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        r,
        tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(out?.value)
}

/// `delta(x) = ∫_0^x e^{-c} · ∫_x^inf e^c / a`.
pub fn diff_delta_at(spec: &DiffusionSpec, x: f64, tol: &Tolerance) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(scale_head(spec, x)? * speed_tail(spec, x, tol)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionDelta {
    /// `sup_x delta(x)`.
    pub delta: f64,
    pub argmax: f64,
    /// Largest `x` visited by the scan.
    pub scanned_to: f64,
    /// `delta(x) + M_x` at the point where the scan stopped; bounds
    /// `delta(y)` for all `y >= x`. `None` when `M_x` is infinite and the
    /// scan stopped on the window rule alone.
    pub tail_majorant: Option<f64>,
    pub lambda1_lower: f64,
    /// Upper bound for the gap of the process killed at 0.
    pub dirichlet_upper: f64,
}

fn scan_point(k: usize) -> f64 {
    // Uniform steps of 1/16 up to 4, then geometric with ratio 2^(1/16).
    if k <= 64 {
        k as f64 / 16.0
    } else {
        4.0 * 2f64.powf((k - 64) as f64 / 16.0)
    }
}

/// `delta = sup_x ∫_0^x e^{-c} ∫_x^inf e^c/a` by a grid scan, stopped by the
/// majorant `delta(y) <= delta(x) + M_x` for `y >= x`, then golden-section
/// refinement around the best grid point.
pub fn diff_delta(spec: &DiffusionSpec, tol: &Tolerance) -> Result<DiffusionDelta> {
    let inner = tol.scaled(0.1);
    let value = |x: f64| diff_delta_at(spec, x, &inner);
    let mut best = (0.0f64, 0usize);
    let mut k = 1usize;
    let mut majorant = None;
    let mut last_x;
    let mut idle_since_check = 0usize;
    loop {
        let x = scan_point(k);
        last_x = x;
        let d = value(x)?;
        if d > best.0 {
            best = (d, k);
            idle_since_check = 0;
        } else {
            idle_since_check += 1;
        }
        if idle_since_check >= SCAN_WINDOW {
            idle_since_check = 0;
            match diff_mr(spec, x, tol) {
                Ok(m) => {
                    if d + m <= best.0 * (1.0 + tol.rel.max(1e-12)) {
                        majorant = Some(d + m);
                        break;
                    }
                }
                Err(e) if e.is_divergence() => {
                    // No majorant: accept once the profile has fallen to half
                    // its maximum over a full window.
                    if d <= 0.5 * best.0 {
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        k += 1;
        if x > SCAN_LIMIT {
            return Err(Error::Inconclusive(format!(
                "delta scan reached x={x} without a tail certificate (best {} at x={})",
                best.0,
                scan_point(best.1)
            )));
        }
    }
    if best.0 <= 0.0 {
        return Err(Error::Inconclusive("delta(x) vanished on the whole scan".into()));
    }
    let lo = scan_point(best.1.saturating_sub(1));
    let hi = scan_point(best.1 + 1);
    let (argmax, delta) = golden_max(&value, lo, hi, best.0, scan_point(best.1), tol)?;
    Ok(DiffusionDelta {
        delta,
        argmax,
        scanned_to: last_x,
        tail_majorant: majorant,
        lambda1_lower: 0.25 / delta,
        dirichlet_upper: 1.0 / delta,
    })
}

fn golden_max(
    f: &impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    mut best: f64,
    mut argmax: f64,
    tol: &Tolerance,
) -> Result<(f64, f64)> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    for _ in 0..200 {
        if (hi - lo) <= 1e-9 * hi.max(1e-3) {
            break;
        }
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b)?;
        }
        for (x, v) in [(a, fa), (b, fb)] {
            if v > best {
                best = v;
                argmax = x;
            }
        }
        if (fa - fb).abs() <= 0.01 * tol.target(best) && (hi - lo) < 1e-6 * hi.max(1e-3) {
            break;
        }
    }
    Ok((argmax, best))
}

/// Rayleigh quotient of the ramp `f = min(1, (x - r)^+ / w)`: an upper bound
/// on `lambda1`.
pub fn diff_ramp_rayleigh(spec: &DiffusionSpec, r: f64, w: f64, tol: &Tolerance) -> Result<f64> {
    if !(r > 0.0 && w > 0.0) {
        return Err(Error::invalid(format!("ramp needs r > 0 and w > 0, got r={r}, w={w}")));
    }
    let g = ratio(spec);
    let ia = inv_a(spec);
    // All masses are relative to the speed density at r.
    let below = speed_head(spec, r)?;
    let ramp = |power: i32| {
        ExpIntegrand {
            g: &g,
            w: |z: f64| ((z - r) / w).clamp(0.0, 1.0).powi(power) * ia(z),
            sign: 1.0,
        }
        .finite(r, r + w)
    };
    let (m0, m1, m2) = (ramp(0)?, ramp(1)?, ramp(2)?);
    let lift = integrate(&g, r, r + w, tol)?.value.exp();
    let above = lift * speed_tail(spec, r + w, tol)?;
    let energy = ExpIntegrand {
        g: &g,
        w: |_| 1.0,
        sign: 1.0,
    }
    .finite(r, r + w)?
        / (w * w);
    let z = below + m0 + above;
    let mean = (m1 + above) / z;
    let second = (m2 + above) / z;
    let var = second - mean * mean;
    if !(var > 0.0) {
        return Err(Error::Inconclusive(format!("ramp at r={r} has no variance")));
    }
    Ok(energy / z / var)
}

/// Smallest ramp Rayleigh quotient over a small family of ramps, with the
/// ramp that attains it.
pub fn diff_step_upper(spec: &DiffusionSpec, around: f64, tol: &Tolerance) -> Result<(f64, f64, f64)> {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for rf in [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0] {
        for wf in [0.25, 0.5, 1.0, 2.0] {
            let r = rf * around;
            let w = wf * around;
            match diff_ramp_rayleigh(spec, r, w, tol) {
                Ok(u) if u < best.0 => best = (u, r, w),
                Ok(_) => {}
                Err(Error::Inconclusive(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Inconclusive("no ramp produced a Rayleigh quotient".into()));
    }
    Ok(best)
}

/// Rate bounds for a diffusion with entrance boundary at infinity.
///
/// `lambda1 >= (4 delta)^-1` and `kappa = lambda1`; the equality is
/// certified by a level `r` with `M_r` below the inverse of a ramp Rayleigh
/// quotient.
pub fn diff_rate_bounds(spec: &DiffusionSpec, tol: &Tolerance) -> Result<RateBounds> {
    let entrance = diff_entrance(spec, tol)?;
    let Some(m0) = entrance.m0.filter(|_| entrance.is_entrance) else {
        let why = if entrance.m0.is_none() {
            "M_0 is infinite"
        } else {
            "the first entrance integral is finite"
        };
        return Err(Error::Divergent(format!("no entrance boundary at infinity: {why}")));
    };
    let d = diff_delta(spec, tol)?;
    let (upper, ramp_r, ramp_w) = diff_step_upper(spec, d.argmax.max(0.05), tol)?;
    let mut b = RateBounds {
        delta: Some(d.delta),
        s: Some(m0),
        lambda1_lower: Some(d.lambda1_lower),
        lambda1_upper: Some(upper),
        dirichlet_lower: Some(d.lambda1_lower),
        dirichlet_upper: Some(d.dirichlet_upper),
        ..Default::default()
    };
    b.record(
        "lambda1_lower",
        BoundSource::DiffusionDelta,
        d.lambda1_lower,
        Some(format!("delta attained at x={:.6}", d.argmax)),
    );
    b.record("lambda1_lower", BoundSource::UniformHitting, 1.0 / m0, Some("1/M_0".into()));
    b.record("dirichlet_upper", BoundSource::HardyDeltaDirichlet, d.dirichlet_upper, None);
    b.record(
        "lambda1_upper",
        BoundSource::StepRayleigh,
        upper,
        Some(format!("ramp from r={ramp_r:.4} over width {ramp_w:.4}")),
    );
    let lower = d.lambda1_lower.max(1.0 / m0);
    b.lambda1_lower = Some(lower);

    // Find r with M_r <= 1/upper by doubling then bisection.
    let threshold = 1.0 / upper;
    let mut certified = None;
    if m0 <= threshold {
        certified = Some((0.0, m0));
    } else {
        let mut lo = 0.0;
        let mut hi = d.argmax.max(0.125);
        let mut found = None;
        for _ in 0..60 {
            let m = diff_mr(spec, hi, tol)?;
            if m <= threshold {
                found = Some(m);
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        if let Some(mut m_hi) = found {
            for _ in 0..20 {
                let mid = 0.5 * (lo + hi);
                let m = diff_mr(spec, mid, tol)?;
                if m <= threshold {
                    hi = mid;
                    m_hi = m;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-3 * hi {
                    break;
                }
            }
            certified = Some((hi, m_hi));
        }
    }
    match certified {
        Some((r, m)) => {
            b.kappa_equals_lambda1 = true;
            b.kappa_lower = lower;
            b.m_h = Some(m);
            b.hitting_set = Some(format!("[0, {r:.6}]"));
            b.record(
                "kappa_lower",
                BoundSource::DiffusionDelta,
                lower,
                Some(format!("kappa = lambda1 certified by M_r <= 1/upper at r={r:.6}")),
            );
        }
        None => {
            let (kappa, _) = combine_bounds(lower, m0)?;
            b.kappa_lower = kappa;
            b.m_h = Some(m0);
            b.hitting_set = Some("[0, 0]".into());
            b.record("kappa_lower", BoundSource::Combination, kappa, None);
            b.notes.push("no level r with M_r <= 1/lambda1_upper was found".into());
        }
    }
    b.check()?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dirichlet_gap, discretize_diffusion, spectral_gap};
    use approx::assert_relative_eq;

    fn tol() -> Tolerance {
        Tolerance::new(1e-10, 1e-14).unwrap()
    }

    fn quartic() -> DiffusionSpec {
        DiffusionSpec::from_text("1", "-4*x^3").unwrap()
    }

    #[test]
    fn c_function() {
        let flat = DiffusionSpec::from_text("1", "0").unwrap();
        assert_eq!(diff_c(&flat, 3.0, &tol()).unwrap(), 0.0);
        let q = quartic();
        assert_eq!(diff_c(&q, 1.0, &tol()).unwrap(), 0.0);
        for x in [0.0, 0.5, 2.0] {
            assert_relative_eq!(diff_c(&q, x, &tol()).unwrap(), 1.0 - x.powi(4), epsilon = 1e-12);
        }
    }

    /// `M_r` straight from the definition with absolute `c`, for a given base point.
    fn mr_direct(spec: &DiffusionSpec, r: f64, base: f64) -> f64 {
        let t = tol();
        let c = |x: f64| diff_c(spec, x, &t).unwrap() - diff_c(spec, base, &t).unwrap();
        integrate(
            |y| {
                let cy = c(y);
                integrate(|z| (c(z) - cy).exp() / spec.a.eval(z), y, f64::INFINITY, &t.scaled(0.1))
                    .unwrap()
                    .value
            },
            r,
            6.0,
            &t,
        )
        .unwrap()
        .value
            + integrate(|y: f64| 0.25 / y.powi(3) * (1.0 - 0.75 / y.powi(4)), 6.0, f64::INFINITY, &t).unwrap().value
    }

    #[test]
    fn m_r_matches_direct_quadrature_and_base_point() {
        let q = quartic();
        for r in [0.0, 0.7, 1.5] {
            let fast = diff_mr(&q, r, &tol()).unwrap();
            for base in [1.0, 0.3, 2.0] {
                assert_relative_eq!(fast, mr_direct(&q, r, base), max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn m_r_decreases_to_zero() {
        let q = quartic();
        let mut prev = f64::INFINITY;
        for r in [0.0, 0.5, 1.0, 2.0, 8.0, 64.0] {
            let m = diff_mr(&q, r, &tol()).unwrap();
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn entrance_verdicts() {
        let e = diff_entrance(&quartic(), &tol()).unwrap();
        assert!(e.is_entrance && e.first_diverges);
        let flat = DiffusionSpec::from_text("1", "0").unwrap();
        let e = diff_entrance(&flat, &tol()).unwrap();
        assert!(!e.is_entrance && e.m0.is_none());
        let ou = DiffusionSpec::from_text("1", "-x").unwrap();
        assert!(!diff_entrance(&ou, &tol()).unwrap().is_entrance);
        assert!(diff_rate_bounds(&flat, &tol()).unwrap_err().is_divergence());
    }

    #[test]
    fn scaling_a_scales_the_second_integral() {
        let q = quartic();
        let m = diff_mr(&q, 0.0, &tol()).unwrap();
        let s = DiffusionSpec::from_text("3", "-12*x^3").unwrap();
        assert_relative_eq!(diff_mr(&s, 0.0, &tol()).unwrap(), m / 3.0, max_relative = 1e-9);
        let d = diff_delta(&q, &tol()).unwrap().delta;
        assert_relative_eq!(diff_delta(&s, &tol()).unwrap().delta, d / 3.0, max_relative = 1e-8);
    }

    #[test]
    fn delta_brackets_oracle_gaps() {
        let q = quartic();
        let d = diff_delta(&q, &tol()).unwrap();
        assert!(d.tail_majorant.is_some());
        let g = discretize_diffusion(&q, 4.0, 2001).unwrap();
        let gap = spectral_gap(&g).unwrap();
        let killed = dirichlet_gap(&g, 0).unwrap();
        assert!(d.lambda1_lower <= killed && killed <= d.dirichlet_upper, "{d:?} {killed}");
        assert!(d.lambda1_lower <= gap);
        // Reflected Ornstein-Uhlenbeck: lambda1 = 2, killed gap = 1.
        let ou = DiffusionSpec::from_text("1", "-x").unwrap();
        let d = diff_delta(&ou, &tol()).unwrap();
        assert!(d.lambda1_lower <= 1.0 && 1.0 <= d.dirichlet_upper, "{d:?}");
    }

    #[test]
    fn rate_bounds_certify_kappa_equals_lambda1() {
        let b = diff_rate_bounds(&quartic(), &tol()).unwrap();
        assert!(b.kappa_equals_lambda1);
        assert!(b.kappa_lower >= 1.1831);
        let g = discretize_diffusion(&quartic(), 4.0, 2001).unwrap();
        let gap = spectral_gap(&g).unwrap();
        assert!(b.lambda1_upper.unwrap() >= gap, "{:?} vs {gap}", b.lambda1_upper);
    }
}
