//! Spectral gaps of finite generators.
//!
//! The generator is symmetrized as `A = D^{1/2} (-Q) D^{-1/2}` with
//! `D = diag(pi)`. For a reversible chain `A` is symmetric and its spectrum
//! is that of `-Q`. For a non-reversible chain the symmetric part of `A` is
//! the additive symmetrization `(Q + Q*)/2`, whose gap is only a lower bound
//! for the decay rate of `P_t` on `L^2(pi)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::GeneratorMatrix;
use crate::{Error, Result};

/// Largest dense eigenproblem attempted.
const DENSE_LIMIT: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    /// Sturm-sequence bisection on a symmetric tridiagonal matrix.
    Sturm,
    /// Dense symmetric eigensolver.
    Dense,
    /// Gap of the additive symmetrization of a non-reversible chain.
    AdditiveSymmetrization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub value: f64,
    pub method: GapMethod,
    /// `false` when `value` is only a lower bound.
    pub exact: bool,
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix
/// with diagonal `d` and squared off-diagonal `e2`.
fn sturm_count(d: &[f64], e2: &[f64], x: f64) -> usize {
    let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tiny = f64::EPSILON * f64::EPSILON * scale;
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        q = d[i] - x - if i > 0 { e2[i - 1] / q } else { 0.0 };
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
fn tridiagonal_eigenvalue(d: &[f64], e2: &[f64], k: usize) -> f64 {
    let n = d.len();
    let radius = |i: usize| {
        let left = if i > 0 { e2[i - 1].sqrt() } else { 0.0 };
        let right = if i + 1 < n { e2[i].sqrt() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| d[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| d[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e2, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Diagonal and squared off-diagonals of the symmetrized `-Q` restricted to
/// the index range `range` of a tridiagonal generator.
fn tridiagonal_parts(q: &GeneratorMatrix, range: std::ops::Range<usize>) -> (Vec<f64>, Vec<f64>) {
    let d: Vec<f64> = range.clone().map(|i| q.exit_rate(i)).collect();
    let e2: Vec<f64> = range
        .clone()
        .take(range.len().saturating_sub(1))
        .map(|i| q.rate(i, i + 1) * q.rate(i + 1, i))
        .collect();
    (d, e2)
}

/// Symmetric part of `D^{1/2} (-Q) D^{-1/2}` on the given states.
fn symmetrized(q: &GeneratorMatrix, states: &[usize]) -> DMatrix<f64> {
    let n = states.len();
    let pi = q.pi();
    let mut pos = vec![usize::MAX; q.len()];
    for (k, &s) in states.iter().enumerate() {
        pos[s] = k;
    }
    let mut a = DMatrix::zeros(n, n);
    for (k, &i) in states.iter().enumerate() {
        a[(k, k)] = q.exit_rate(i);
        for &(j, r) in q.row(i) {
            let l = pos[j];
            if l == usize::MAX {
                continue;
            }
            let v = -0.5 * (pi[i] / pi[j]).sqrt() * r;
            a[(k, l)] += v;
            a[(l, k)] += v;
        }
    }
    a
}

fn sorted_eigenvalues(a: DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() > DENSE_LIMIT {
        return Err(Error::Eigen(format!("dense eigenproblem of size {} is too large", a.nrows())));
    }
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `lambda1`, the smallest nonzero eigenvalue of `-Q` for reversible chains.
pub fn spectral_gap(q: &GeneratorMatrix) -> Result<f64> {
    spectral_gap_report(q).map(|r| r.value)
}

pub fn spectral_gap_report(q: &GeneratorMatrix) -> Result<GapReport> {
    if q.len() < 2 {
        return Err(Error::invalid("spectral gap needs at least two states"));
    }
    let (value, method) = if q.is_tridiagonal() {
        let (d, e2) = tridiagonal_parts(q, 0..q.len());
        (tridiagonal_eigenvalue(&d, &e2, 1), GapMethod::Sturm)
    } else {
        let states: Vec<usize> = (0..q.len()).collect();
        let ev = sorted_eigenvalues(symmetrized(q, &states))?;
        let method = if q.is_reversible() { GapMethod::Dense } else { GapMethod::AdditiveSymmetrization };
        (ev[1], method)
    };
    let scale = q.max_exit_rate().max(f64::MIN_POSITIVE);
    if !(value > 1e-12 * scale) {
        return Err(Error::Reducible(format!("spectral gap {value} is zero at working precision")));
    }
    Ok(GapReport {
        value,
        method,
        exact: method != GapMethod::AdditiveSymmetrization,
    })
}

/// Bottom of the spectrum of `-Q` killed at `x`.
pub fn dirichlet_gap(q: &GeneratorMatrix, x: usize) -> Result<f64> {
    let n = q.len();
    if x >= n {
        return Err(Error::invalid(format!("state {x} outside {n} states")));
    }
    if n == 1 {
        return Err(Error::invalid("killing the only state leaves nothing"));
    }
    if q.is_tridiagonal() {
        let mut best = f64::INFINITY;
        for range in [0..x, x + 1..n] {
            if range.is_empty() {
                continue;
            }
            let (d, e2) = tridiagonal_parts(q, range);
            best = best.min(tridiagonal_eigenvalue(&d, &e2, 0));
        }
        return Ok(best);
    }
    let states: Vec<usize> = (0..n).filter(|&i| i != x).collect();
    let ev = sorted_eigenvalues(symmetrized(q, &states))?;
    Ok(ev[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{random_reversible, Boundary};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state(a: f64, b: f64) -> GeneratorMatrix {
        GeneratorMatrix::from_rates(2, &[(0, 1, b), (1, 0, a)], Boundary::Exact).unwrap()
    }

    #[test]
    fn two_state_gaps() {
        assert_relative_eq!(spectral_gap(&two_state(1.0, 1.0)).unwrap(), 2.0, max_relative = 1e-13);
        assert_relative_eq!(spectral_gap(&two_state(0.3, 2.0)).unwrap(), 2.3, max_relative = 1e-13);
        assert_relative_eq!(dirichlet_gap(&two_state(1.0, 1.0), 0).unwrap(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn sturm_agrees_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 7, 20] {
            let rates: Vec<(usize, usize, f64)> = (0..n - 1)
                .flat_map(|i| {
                    use rand::Rng;
                    let (u, d) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
                    [(i, i + 1, u), (i + 1, i, d)]
                })
                .collect();
            let g = GeneratorMatrix::from_rates(n, &rates, Boundary::Exact).unwrap();
            let states: Vec<usize> = (0..n).collect();
            let ev = sorted_eigenvalues(symmetrized(&g, &states)).unwrap();
            assert!(ev[0].abs() < 1e-12);
            assert_relative_eq!(spectral_gap(&g).unwrap(), ev[1], max_relative = 1e-10);
            for x in [0, n / 2, n - 1] {
                let kept: Vec<usize> = (0..n).filter(|&i| i != x).collect();
                let ev = sorted_eigenvalues(symmetrized(&g, &kept)).unwrap();
                assert_relative_eq!(dirichlet_gap(&g, x).unwrap(), ev[0], max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn gap_dominates_dirichlet_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_reversible(6, 0.5, &mut rng).unwrap();
            let gap = spectral_gap(&g).unwrap();
            for x in 0..6 {
                assert!(dirichlet_gap(&g, x).unwrap() <= gap * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_reversible(5, 0.5, &mut rng).unwrap();
        assert_relative_eq!(spectral_gap(&g.scaled(3.0)).unwrap(), 3.0 * spectral_gap(&g).unwrap(), max_relative = 1e-10);
    }
}
