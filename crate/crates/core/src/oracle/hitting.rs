//! Moments of hitting times by linear solves on the complement of the target.

use nalgebra::{DMatrix, DVector};

use super::GeneratorMatrix;
use crate::{Error, Result};

/// `(E_x tau_H^k)_x` for `k = 1..=order`, zero on `H`.
///
/// With `A` the restriction of `Q` to `H^c`, the moments solve
/// `A u_1 = -1` and `A u_k = -k u_{k-1}`.
pub fn hitting_moment_orders(q: &GeneratorMatrix, target: &[usize], order: usize) -> Result<Vec<Vec<f64>>> {
    let n = q.len();
    if order == 0 {
        return Err(Error::invalid("moment order must be >= 1"));
    }
    if target.is_empty() {
        return Err(Error::invalid("target set must be nonempty"));
    }
    let mut in_target = vec![false; n];
    for &h in target {
        if h >= n {
            return Err(Error::invalid(format!("target state {h} outside {n} states")));
        }
        in_target[h] = true;
    }
    let solver = Solver::new(q, &in_target)?;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(order);
    let mut rhs: Vec<f64> = in_target.iter().map(|&h| if h { 0.0 } else { 1.0 }).collect();
    for k in 1..=order {
        let u = solver.solve(&rhs)?;
        rhs = u.iter().map(|v| (k + 1) as f64 * v).collect();
        out.push(u);
    }
    Ok(out)
}

/// `(E_x tau_H^order)_x`, zero on `H`.
pub fn hitting_moments(q: &GeneratorMatrix, target: &[usize], order: usize) -> Result<Vec<f64>> {
    Ok(hitting_moment_orders(q, target, order)?.pop().expect("order >= 1"))
}

/// Solves `-A u = r` on `H^c` (so `u >= 0` for `r >= 0`).
enum Solver<'a> {
    /// Runs of consecutive free states in a nearest-neighbour chain.
    Tridiagonal { q: &'a GeneratorMatrix, runs: Vec<(usize, usize)> },
    Dense { free: Vec<usize>, lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, n: usize },
}

impl<'a> Solver<'a> {
    fn new(q: &'a GeneratorMatrix, in_target: &[bool]) -> Result<Self> {
        let n = q.len();
        if q.is_tridiagonal() {
            let mut runs = Vec::new();
            let mut i = 0;
            while i < n {
                if in_target[i] {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < n && !in_target[i] {
                    i += 1;
                }
                runs.push((start, i));
            }
            return Ok(Solver::Tridiagonal { q, runs });
        }
        let free: Vec<usize> = (0..n).filter(|&i| !in_target[i]).collect();
        let m = free.len();
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            pos[i] = k;
        }
        let mut a = DMatrix::zeros(m, m);
        for (k, &i) in free.iter().enumerate() {
            a[(k, k)] = q.exit_rate(i);
            for &(j, r) in q.row(i) {
                if pos[j] != usize::MAX {
                    a[(k, pos[j])] -= r;
                }
            }
        }
        Ok(Solver::Dense { free, lu: a.lu(), n })
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Solver::Tridiagonal { q, runs } => {
                let mut u = vec![0.0; q.len()];
                for &(s, e) in runs {
                    // Thomas algorithm for exit_i u_i - q_{i,i-1} u_{i-1} - q_{i,i+1} u_{i+1} = r_i.
                    let m = e - s;
                    let mut c = vec![0.0; m];
                    let mut d = vec![0.0; m];
                    for k in 0..m {
                        let i = s + k;
                        let sub = if k > 0 { -q.rate(i, i - 1) } else { 0.0 };
                        let sup = if k + 1 < m { -q.rate(i, i + 1) } else { 0.0 };
                        let denom = q.exit_rate(i) - if k > 0 { sub * c[k - 1] } else { 0.0 };
                        if !(denom.abs() > 0.0) {
                            return Err(Error::Singular(format!(
                                "states {s}..{e} cannot reach the target"
                            )));
                        }
                        c[k] = sup / denom;
                        d[k] = (rhs[i] - if k > 0 { sub * d[k - 1] } else { 0.0 }) / denom;
                    }
                    for k in (0..m).rev() {
                        u[s + k] = d[k] - if k + 1 < m { c[k] * u[s + k + 1] } else { 0.0 };
                    }
                }
                check(u)
            }
            Solver::Dense { free, lu, n } => {
                let b = DVector::from_iterator(free.len(), free.iter().map(|&i| rhs[i]));
                let x = lu
                    .solve(&b)
                    .ok_or_else(|| Error::Singular("restricted generator is singular; the target is not reachable".into()))?;
                let mut u = vec![0.0; *n];
                for (k, &i) in free.iter().enumerate() {
                    u[i] = x[k];
                }
                check(u)
            }
        }
    }
}

fn check(u: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(v) = u.iter().find(|v| !v.is_finite() || **v < -1e-9) {
        return Err(Error::Singular(format!(
            "hitting moment came out as {v}; the target is not reachable from every state"
        )));
    }
    Ok(u)
}
