//! Integrals `∫ exp(s ∫_{x0}^z g(u) du) w(z) dz` evaluated without ever
//! forming the absolute exponent.
//!
//! The integration variable is stepped away from `x0` through cells. On each
//! cell `g` and `w` are sampled at Chebyshev-Lobatto points, the running
//! exponent is integrated spectrally, and the cell integral is taken by
//! Clenshaw-Curtis. Cells are halved until the trailing Chebyshev
//! coefficients are negligible and the exponent varies by at most
//! `MAX_CELL_SWING` across the cell, so super-exponential scale and speed
//! densities (`c(x) = -x^4` and the like) are handled in relative form.
//!
//! Sweeps towards `+inf` are summed over unit-dyadic panels as a series, which
//! yields a divergence verdict when the integral is infinite.

use std::sync::OnceLock;

use crate::numerics::{sum_series_with, SeriesOptions, Tolerance};
use crate::{Error, Result};

const NODES: usize = 21;
const DEG: usize = NODES - 1;
/// Largest exponent change accepted within one cell.
const MAX_CELL_SWING: f64 = 6.0;
/// Relative size of the trailing coefficients for a resolved cell.
const RESOLVED: f64 = 1e-13;
/// Once the exponent sits this far (in log units) below the running total and
/// is still decreasing, the remaining mass is treated as zero.
const NEGLIGIBLE_LOG: f64 = 42.0;
const MAX_CELLS: usize = 400_000;
/// Relative cell width below which the local expansion replaces cells.
const STEEP_SPAN: f64 = 1e-9;

struct Tables {
    /// `t_j = cos(pi j / DEG)`, from `1` down to `-1`.
    nodes: [f64; NODES],
    /// `cos(pi j k / DEG)` for `k` in `0..=NODES` (one extra degree for
    /// antiderivatives).
    cos: Vec<[f64; NODES + 1]>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut nodes = [0.0; NODES];
        let mut cos = vec![[0.0; NODES + 1]; NODES];
        for j in 0..NODES {
            let theta = std::f64::consts::PI * j as f64 / DEG as f64;
            nodes[j] = theta.cos();
            for (k, c) in cos[j].iter_mut().enumerate() {
                *c = (k as f64 * theta).cos();
            }
        }
        // Exact endpoints and centre.
        nodes[0] = 1.0;
        nodes[DEG] = -1.0;
        nodes[DEG / 2] = 0.0;
        Tables { nodes, cos }
    })
}

/// Chebyshev coefficients of the interpolant through the Lobatto values.
fn coefficients(v: &[f64; NODES]) -> [f64; NODES] {
    let t = tables();
    let mut c = [0.0; NODES];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut s = 0.5 * (v[0] * t.cos[0][k] + v[DEG] * t.cos[DEG][k]);
        for j in 1..DEG {
            s += v[j] * t.cos[j][k];
        }
        *ck = 2.0 * s / DEG as f64;
    }
    c[0] *= 0.5;
    c[DEG] *= 0.5;
    c
}

fn unresolved(c: &[f64; NODES]) -> bool {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = c[DEG].abs().max(c[DEG - 1].abs()).max(c[DEG - 2].abs());
    tail > RESOLVED * scale
}

/// `∫_{-1}^{t_j} p(t) dt` at every node for the polynomial with coefficients `c`.
fn cumulative(c: &[f64; NODES]) -> [f64; NODES] {
    let t = tables();
    let mut b = [0.0; NODES + 1];
    let at = |k: usize| if k < NODES { c[k] } else { 0.0 };
    b[1] = c[0] - 0.5 * at(2);
    for k in 2..=NODES {
        b[k] = (at(k - 1) - at(k + 1)) / (2.0 * k as f64);
    }
    let mut out = [0.0; NODES];
    for (j, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 1..=NODES {
            let at_minus_one = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += b[k] * (t.cos[j][k] - at_minus_one);
        }
        *o = s;
    }
    out
}

/// `∫_{-1}^{1} p(t) dt`.
fn definite(c: &[f64; NODES]) -> f64 {
    c.iter()
        .enumerate()
        .step_by(2)
        .map(|(k, ck)| ck * 2.0 / (1.0 - (k * k) as f64))
        .sum()
}

/// One cell from `p` to `q` (either order).
struct Cell {
    /// `ln ∫_cell exp(e(z)) w(z) dz` with `e` the exponent relative to `p`.
    log_integral: f64,
    /// Exponent at `q` relative to `p`.
    swing: f64,
}

/// The integrand data: `g` drives the exponent, `w` is the weight.
pub(crate) struct ExpIntegrand<G, W> {
    pub g: G,
    pub w: W,
    /// `+1` for `exp(∫_{x0}^z g)`, `-1` for `exp(-∫_{x0}^z g)`.
    pub sign: f64,
}

/// Position of a sweep in progress.
#[derive(Debug, Clone, Copy)]
struct Sweep {
    pos: f64,
    /// Exponent at `pos` relative to the start.
    exponent: f64,
    width: f64,
    /// Running integral (relative to the start).
    total: f64,
    cells: usize,
    /// Remaining mass judged negligible.
    done: bool,
}

impl<G: Fn(f64) -> f64, W: Fn(f64) -> f64> ExpIntegrand<G, W> {
    fn cell(&self, p: f64, q: f64) -> Result<Option<Cell>> {
        let t = tables();
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut gv = [0.0; NODES];
        let mut wv = [0.0; NODES];
        for j in 0..NODES {
            let u = mid + half * t.nodes[j];
            gv[j] = (self.g)(u);
            wv[j] = (self.w)(u);
            if !gv[j].is_finite() || !wv[j].is_finite() || wv[j] < 0.0 {
                return Err(Error::NonFinite {
                    value: if gv[j].is_finite() { wv[j] } else { gv[j] },
                    at: format!("integrand coefficient at x={u}"),
                });
            }
        }
        let gc = coefficients(&gv);
        if unresolved(&gc) {
            return Ok(None);
        }
        // cum[j] = ∫_lo^{u_j} g; node 0 is `hi`, node DEG is `lo`.
        let cum = cumulative(&gc).map(|v| v * half);
        let rel_at_p = if p < q { 0.0 } else { cum[0] };
        let mut e = [0.0; NODES];
        for j in 0..NODES {
            e[j] = self.sign * (cum[j] - rel_at_p);
        }
        let (emin, emax) = e.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if emax - emin > MAX_CELL_SWING {
            return Ok(None);
        }
        let mut fv = [0.0; NODES];
        for j in 0..NODES {
            fv[j] = (e[j] - emax).exp() * wv[j];
        }
        let fc = coefficients(&fv);
        if unresolved(&fc) {
            return Ok(None);
        }
        let integral = (half * definite(&fc)).max(0.0);
        let swing = if p < q { e[0] } else { e[DEG] };
        Ok(Some(Cell {
            log_integral: emax + integral.ln(),
            swing,
        }))
    }

    /// Integrates from `s.pos` to `to`, continuing the sweep state.
    fn advance(&self, s: &mut Sweep, to: f64) -> Result<f64> {
        let dir = if to >= s.pos { 1.0 } else { -1.0 };
        let mut acc = 0.0;
        while !s.done && (to - s.pos) * dir > 0.0 {
            if s.cells >= MAX_CELLS {
                return Err(Error::CapExhausted {
                    cap: MAX_CELLS,
                    partial: s.total,
                    error: f64::NAN,
                });
            }
            let remaining = (to - s.pos).abs();
            let slope = (self.g)(s.pos).abs();
            if slope * STEEP_SPAN * s.pos.abs().max(1.0) > MAX_CELL_SWING && remaining * slope > 2.0 * NEGLIGIBLE_LOG {
                // Cells would shrink towards the float spacing: the rest is a
                // Laplace-type integral concentrated next to `pos`.
                let rest = self.laplace(s.pos, dir)?;
                let contribution = (s.exponent).exp() * rest;
                acc += contribution;
                s.total += contribution;
                s.done = true;
                break;
            }
            let mut h = s.width.min(remaining);
            if slope > 0.0 {
                h = h.min(MAX_CELL_SWING / slope);
            }
            let floor = 1e-15 * s.pos.abs().max(1.0);
            let cell = loop {
                let q = if h >= remaining { to } else { s.pos + dir * h };
                if let Some(c) = self.cell(s.pos, q)? {
                    break (c, q);
                }
                h *= 0.5;
                if h < floor {
                    return Err(Error::Inconclusive(format!(
                        "integrand cannot be resolved near x={}",
                        s.pos
                    )));
                }
            };
            let (c, q) = cell;
            let contribution = (s.exponent + c.log_integral).exp();
            if contribution == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
            acc += contribution;
            s.total += contribution;
            s.exponent += c.swing;
            s.width = (2.0 * (q - s.pos).abs()).max(floor);
            s.pos = q;
            s.cells += 1;
            // Stop once the exponent keeps falling far below the total.
            let falling = dir * self.sign * (self.g)(q) < 0.0;
            let w_here = (self.w)(q).max(f64::MIN_POSITIVE);
            let reach = (1.0 / (self.g)(q).abs()).min(remaining.max(1.0));
            if falling && s.total > 0.0 && s.exponent + (w_here * reach).ln() < s.total.ln() - NEGLIGIBLE_LOG {
                s.done = true;
            }
        }
        Ok(acc)
    }

    /// `∫_0^inf exp(E(u)) w(pos + dir u) du` for a steep exponent, to second
    /// order: with `E(u) ≈ -k u + E'' u^2 / 2`, the value is
    /// `w/k + w E''/k^3 + dir w'/k^2`. A rising exponent gives `+inf`.
    fn laplace(&self, pos: f64, dir: f64) -> Result<f64> {
        let rate = dir * self.sign * (self.g)(pos);
        if rate >= 0.0 {
            return Ok(f64::INFINITY);
        }
        let k = -rate;
        let eta = 1e-6 * pos.abs().max(1.0);
        let slope_of = |f: &dyn Fn(f64) -> f64| (f(pos + eta) - f(pos - eta)) / (2.0 * eta);
        let curvature = self.sign * slope_of(&|x| (self.g)(x));
        let w = (self.w)(pos);
        let dw = slope_of(&|x| (self.w)(x));
        let v = w / k + w * curvature / (k * k * k) + dir * dw / (k * k);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                at: format!("local expansion at x={pos}"),
            });
        }
        Ok(v.max(0.0))
    }

    fn start(x0: f64) -> Sweep {
        Sweep {
            pos: x0,
            exponent: 0.0,
            width: 0.5 * x0.abs().max(1.0),
            total: 0.0,
            cells: 0,
            done: false,
        }
    }

    /// `∫` over the finite interval between `x0` and `end`.
    pub fn finite(&self, x0: f64, end: f64) -> Result<f64> {
        let mut s = Self::start(x0);
        self.advance(&mut s, end)
    }

    /// `∫_{x0}^{inf}`, with a divergence verdict.
    pub fn to_infinity(&self, x0: f64, tol: &Tolerance) -> Result<f64> {
        let mut s = Self::start(x0);
        let mut failure = None;
        let r = sum_series_with(
            |k| {
                if failure.is_some() || s.done {
                    return 0.0;
                }
                let end = x0 + 2f64.powi(k as i32);
                if !end.is_finite() {
                    return f64::INFINITY;
                }
                match self.advance(&mut s, end) {
                    Ok(v) => v,
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
        r?.finite("integral to infinity")
    }
}
