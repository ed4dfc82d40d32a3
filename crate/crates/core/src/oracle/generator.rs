//! Finite generator matrices and truncation of the model families.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::model::{BirthDeathSpec, DiffusionSpec, ModelSpec, RadialSpec, SingleDeathSpec, TreeSpec};
use crate::{Error, Result};

/// How the state space was cut down to a finite one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Jumps past the last state are removed or redirected onto it.
    Reflecting,
    /// The chain was finite to begin with.
    Exact,
}

/// A finite conservative generator with its stationary distribution.
///
/// Off-diagonal rates are stored row-wise; the diagonal is implied by the
/// row sums being zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    pi: Vec<f64>,
    pub boundary: Boundary,
    reversible: bool,
    tridiagonal: bool,
    /// Mesh width when the matrix discretizes a diffusion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<f64>,
}

/// Relative detailed-balance defect below which a chain counts as reversible.
const REVERSIBILITY_TOL: f64 = 1e-10;

impl GeneratorMatrix {
    /// Builds from `(i, j, rate)` triples; duplicates add, zero rates are dropped.
    pub fn from_rates(n: usize, rates: &[(usize, usize, f64)], boundary: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("generator needs at least one state"));
        }
        let mut rows = vec![Vec::<(usize, f64)>::new(); n];
        for &(i, j, q) in rates {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("rate ({i}, {j}) outside {n} states")));
            }
            if !q.is_finite() || q < 0.0 {
                return Err(Error::invariant(format!("off-diagonal rate must be finite and >= 0, got {q}"), format!("q[{i}][{j}]")));
            }
            if i == j || q == 0.0 {
                continue;
            }
            match rows[i].iter_mut().find(|e| e.0 == j) {
                Some(e) => e.1 += q,
                None => rows[i].push((j, q)),
            }
        }
        for r in &mut rows {
            r.sort_by_key(|e| e.0);
        }
        Self::from_rows(rows, boundary)
    }

    /// Reads the off-diagonal part of a dense matrix; the diagonal is ignored.
    pub fn from_dense(q: &DMatrix<f64>, boundary: Boundary) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::invalid("generator must be square"));
        }
        let n = q.nrows();
        let mut rates = Vec::new();
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                sum += q[(i, j)];
                if i != j {
                    rates.push((i, j, q[(i, j)]));
                }
            }
            let scale = q[(i, i)].abs().max(1.0);
            if sum.abs() > 1e-12 * scale {
                return Err(Error::invariant(format!("row sum {sum} is not zero"), format!("row {i}")));
            }
        }
        Self::from_rates(n, &rates, boundary)
    }

    fn from_rows(rows: Vec<Vec<(usize, f64)>>, boundary: Boundary) -> Result<Self> {
        let tridiagonal = rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().all(|&(j, _)| j + 1 == i || j == i + 1));
        let mut g = GeneratorMatrix {
            rows,
            pi: Vec::new(),
            boundary,
            reversible: false,
            tridiagonal,
            mesh: None,
        };
        g.pi = if tridiagonal { g.tridiagonal_stationary()? } else { g.nullspace_stationary()? };
        g.reversible = tridiagonal || g.reversibility_defect().map_or(false, |d| d.2 <= REVERSIBILITY_TOL);
        Ok(g)
    }

    /// Detailed balance along a path: `pi_{i+1} / pi_i = q_{i,i+1} / q_{i+1,i}`.
    fn tridiagonal_stationary(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut log_pi = vec![0.0; n];
        for i in 0..n - 1 {
            let (up, down) = (self.rate(i, i + 1), self.rate(i + 1, i));
            if up <= 0.0 || down <= 0.0 {
                return Err(Error::Reducible(format!("no two-way link between states {i} and {}", i + 1)));
            }
            log_pi[i + 1] = log_pi[i] + up.ln() - down.ln();
        }
        Ok(normalize_log(&log_pi))
    }

    /// Grassmann-Taksar-Heyman state reduction. It never subtracts, so the
    /// weights stay positive even when they span many orders of magnitude.
    fn nullspace_stationary(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut a = self.to_dense();
        for i in 0..n {
            a[(i, i)] = 0.0;
        }
        let mut out_rate = vec![0.0; n];
        for k in (1..n).rev() {
            let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
            if !(s > 0.0) {
                return Err(Error::Reducible(format!("state {k} cannot reach any lower state after reduction")));
            }
            out_rate[k] = s;
            for i in 0..k {
                let aik = a[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..k {
                    a[(i, j)] += aik * a[(k, j)] / s;
                }
            }
        }
        let mut pi = vec![0.0; n];
        pi[0] = 1.0;
        for k in 1..n {
            pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum::<f64>() / out_rate[k];
            if !(pi[k] > 0.0) {
                return Err(Error::Reducible(format!(
                    "stationary weight of state {k} is zero (unreachable, or below the floating-point range)"
                )));
            }
        }
        let total: f64 = pi.iter().sum();
        Ok(pi.iter().map(|p| p / total).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// `-Q_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|e| e.1).sum()
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.len()).map(|i| self.exit_rate(i)).fold(0.0, f64::max)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// Nearest-neighbour structure (birth-death chains and 1-d meshes).
    pub fn is_tridiagonal(&self) -> bool {
        self.tridiagonal
    }

    /// Largest relative detailed-balance defect `(i, j, defect)`.
    pub fn reversibility_defect(&self) -> Option<(usize, usize, f64)> {
        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..self.len() {
            for &(j, q) in &self.rows[i] {
                let lhs = self.pi[i] * q;
                let rhs = self.pi[j] * self.rate(j, i);
                let d = (lhs - rhs).abs() / lhs.max(rhs);
                if worst.map_or(true, |w| d > w.2) {
                    worst = Some((i, j, d));
                }
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                q[(i, j)] = r;
                q[(i, i)] -= r;
            }
        }
        q
    }

    /// The same chain run `s` times faster.
    pub fn scaled(&self, s: f64) -> Self {
        let mut g = self.clone();
        for r in &mut g.rows {
            for e in r.iter_mut() {
                e.1 *= s;
            }
        }
        g
    }

    /// Checks the stored invariants: zero row sums are structural, so this
    /// covers `pi > 0`, `sum pi = 1` and `pi Q = 0`.
    pub fn check(&self) -> Result<()> {
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.pi.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invariant("pi must be a positive probability vector", "GeneratorMatrix"));
        }
        let mut flux = vec![0.0; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, q) in row {
                flux[j] += self.pi[i] * q;
                flux[i] -= self.pi[i] * q;
            }
        }
        let scale = self.max_exit_rate().max(1.0);
        if let Some(i) = flux.iter().position(|f| f.abs() > 1e-10 * scale) {
            return Err(Error::invariant(format!("(pi Q)_{i} = {} is not zero", flux[i]), "GeneratorMatrix"));
        }
        Ok(())
    }
}

fn normalize_log(log_w: &[f64]) -> Vec<f64> {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Finite surrogate of a chain model on `n` states, or of a diffusion on
/// `n` mesh points over `[0, length]`.
pub fn truncate_generator(spec: &ModelSpec, n: usize, length: Option<f64>) -> Result<GeneratorMatrix> {
    if n < 2 {
        return Err(Error::invalid(format!("truncation needs at least 2 states, got {n}")));
    }
    match spec {
        ModelSpec::BirthDeath(s) => truncate_birth_death(s, n),
        ModelSpec::SingleDeath(s) => truncate_single_death(s, n),
        ModelSpec::Tree(s) => truncate_tree(s, n),
        ModelSpec::Diffusion(s) => {
            let length = length.ok_or_else(|| Error::invalid("diffusion discretization needs a domain length"))?;
            discretize_diffusion(s, length, n)
        }
        ModelSpec::RadialDiffusion(s) => discretize_radial(s, length, n),
        ModelSpec::StableSde(_) | ModelSpec::TcStable(_) => Err(Error::Unsupported(format!(
            "no finite generator for the {} family",
            spec.family()
        ))),
    }
}

pub fn truncate_birth_death(spec: &BirthDeathSpec, n: usize) -> Result<GeneratorMatrix> {
    let n = spec.states.map_or(n, |s| s.min(n));
    let boundary = if spec.states == Some(n) { Boundary::Exact } else { Boundary::Reflecting };
    let mut rates = Vec::with_capacity(2 * n);
    for i in 0..n - 1 {
        rates.push((i, i + 1, spec.birth(i)));
        rates.push((i + 1, i, spec.death(i + 1)));
    }
    GeneratorMatrix::from_rates(n, &rates, boundary)
}

/// Upward jumps past `n-1` land on `n-1`.
pub fn truncate_single_death(spec: &SingleDeathSpec, n: usize) -> Result<GeneratorMatrix> {
    let n = if spec.is_finite() { n.min(spec.dimension) } else { n };
    let boundary = if spec.is_finite() && n == spec.dimension { Boundary::Exact } else { Boundary::Reflecting };
    let mut rates = Vec::new();
    for i in 0..n {
        for (j, q) in spec.row(i) {
            if j < i || j < n {
                rates.push((i, j, q));
            } else if i != n - 1 {
                rates.push((i, n - 1, q));
            }
        }
    }
    GeneratorMatrix::from_rates(n, &rates, boundary)
}

/// Explicit nodes first, then every ray unrolled to an equal share of the
/// remaining states.
pub fn truncate_tree(spec: &TreeSpec, n: usize) -> Result<GeneratorMatrix> {
    let explicit = spec.len();
    let mut rates = Vec::new();
    for (j, node) in spec.nodes.iter().enumerate().skip(1) {
        let p = node.parent.expect("non-root nodes have parents");
        rates.push((p, j, node.up));
        rates.push((j, p, node.down));
    }
    let mut total = explicit;
    if !spec.rays.is_empty() {
        if n <= explicit {
            return Err(Error::invalid(format!(
                "truncation at {n} states leaves no room for rays beyond {explicit} explicit nodes"
            )));
        }
        let share = (n - explicit) / spec.rays.len();
        if share == 0 {
            return Err(Error::invalid("truncation too small to unroll every ray"));
        }
        for ray in &spec.rays {
            let base = spec.depth(ray.from);
            let mut prev = ray.from;
            for k in 1..=share {
                let d = (base + k) as f64;
                let id = total;
                total += 1;
                rates.push((prev, id, ray.up.eval(d)));
                rates.push((id, prev, ray.down.eval(d)));
                prev = id;
            }
        }
    }
    let boundary = if spec.rays.is_empty() { Boundary::Exact } else { Boundary::Reflecting };
    GeneratorMatrix::from_rates(total, &rates, boundary)
}

/// Bernoulli function `z / (e^z - 1)`, continuous at 0.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z / 2.0
    } else {
        z / z.exp_m1()
    }
}

/// Tridiagonal generator for `a f'' + b f'` on `points` equally spaced nodes.
///
/// Central differences are used where they keep off-diagonals nonnegative
/// (`|b| h <= 2a`); elsewhere the row switches to exponentially fitted
/// weights. The end rows use the zero-flux stencil `f_{-1} = f_1`.
fn mesh_generator(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, left: f64, right: f64, points: usize) -> Result<GeneratorMatrix> {
    let h = (right - left) / (points - 1) as f64;
    let mut rates = Vec::with_capacity(2 * points);
    let mut fitted = 0usize;
    for i in 0..points {
        let x = left + h * i as f64;
        let (ai, bi) = (a(x), b(x));
        if !(ai > 0.0) || !ai.is_finite() || !bi.is_finite() {
            return Err(Error::Discretization(format!("coefficients a={ai}, b={bi} unusable at x={x}")));
        }
        let diff = ai / (h * h);
        if i == 0 {
            rates.push((0, 1, 2.0 * diff));
            continue;
        }
        if i == points - 1 {
            rates.push((i, i - 1, 2.0 * diff));
            continue;
        }
        let peclet = bi * h / ai;
        let (up, down) = if peclet.abs() <= 2.0 {
            (diff + bi / (2.0 * h), diff - bi / (2.0 * h))
        } else {
            fitted += 1;
            (diff * bernoulli(-peclet), diff * bernoulli(peclet))
        };
        rates.push((i, i + 1, up));
        rates.push((i, i - 1, down));
    }
    if fitted > 0 {
        log::debug!("{fitted} of {points} mesh rows use exponentially fitted weights");
    }
    let mut g = GeneratorMatrix::from_rates(points, &rates, Boundary::Reflecting)?;
    if g.rows.iter().enumerate().any(|(i, r)| (i > 0 && g.rate(i, i - 1) <= 0.0) || r.is_empty()) {
        return Err(Error::Discretization("mesh produced a disconnected generator; refine the mesh".into()));
    }
    g.mesh = Some(h);
    Ok(g)
}

pub fn discretize_diffusion(spec: &DiffusionSpec, length: f64, points: usize) -> Result<GeneratorMatrix> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("domain length must be positive, got {length}")));
    }
    mesh_generator(|x| spec.a.eval(x), |x| spec.b.eval(x), 0.0, length, points)
}

/// Reflecting mesh generator for `a f'' + b f'` on `[left, right]`; with a
/// symmetric interval this approximates the process on the whole line.
pub fn discretize_diffusion_interval(spec: &DiffusionSpec, left: f64, right: f64, points: usize) -> Result<GeneratorMatrix> {
    if !(right > left) || !left.is_finite() || !right.is_finite() {
        return Err(Error::invalid(format!("need a finite interval with left < right, got [{left}, {right}]")));
    }
    if points < 3 {
        return Err(Error::invalid(format!("a mesh needs at least 3 points, got {points}")));
    }
    mesh_generator(|x| spec.a.eval(x), |x| spec.b.eval(x), left, right, points)
}

/// `f'' + beta(r) f'` on `[r0, D]`; `length` overrides `D - r0` and is
/// required when `D` is infinite.
pub fn discretize_radial(spec: &RadialSpec, length: Option<f64>, points: usize) -> Result<GeneratorMatrix> {
    let right = match (length, spec.outer) {
        (Some(l), _) => spec.r0 + l,
        (None, Some(d)) => d,
        (None, None) => return Err(Error::invalid("radial model with D = inf needs a domain length")),
    };
    mesh_generator(|_| 1.0, |r| spec.beta.eval(r), spec.r0, right, points)
}

/// Random reversible chain: symmetric conductances on a connected graph
/// (a spanning path plus extra edges with probability `density`) and random
/// stationary weights, `q_ij = c_ij / w_i`.
pub fn random_reversible<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<GeneratorMatrix> {
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let perm = {
        let mut p: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(p.as_mut_slice(), rng);
        p
    };
    let mut rates = Vec::new();
    let link = |i: usize, j: usize, c: f64, rates: &mut Vec<(usize, usize, f64)>| {
        rates.push((i, j, c / weights[i]));
        rates.push((j, i, c / weights[j]));
    };
    for k in 0..n.saturating_sub(1) {
        let c = rng.random_range(0.1..1.0);
        link(perm[k], perm[k + 1], c, &mut rates);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let c = rng.random_range(0.1..1.0);
                link(i, j, c, &mut rates);
            }
        }
    }
    GeneratorMatrix::from_rates(n, &rates, Boundary::Exact)
}

/// Random irreducible chain with no symmetry: a directed cycle plus random
/// extra rates.
pub fn random_chain<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<GeneratorMatrix> {
    let mut rates = Vec::new();
    for i in 0..n {
        rates.push((i, (i + 1) % n, rng.random_range(0.2..2.0)));
        for j in 0..n {
            if j != i && rng.random_bool(density) {
                rates.push((i, j, rng.random_range(0.0..2.0)));
            }
        }
    }
    GeneratorMatrix::from_rates(n, &rates, Boundary::Exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_state_birth_death() {
        let bd = BirthDeathSpec::from_text("1", "1", Some(2)).unwrap();
        let g = truncate_generator(&ModelSpec::BirthDeath(bd), 10, None).unwrap();
        assert_eq!(g.to_dense(), DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        assert_eq!(g.pi(), &[0.5, 0.5]);
        assert_eq!(g.boundary, Boundary::Exact);
        assert!(g.is_reversible());
    }

    #[test]
    fn birth_death_truncation_reflects() {
        let bd = BirthDeathSpec::from_text("1", "(i+1)^2", None).unwrap();
        let g = truncate_birth_death(&bd, 50).unwrap();
        assert_eq!(g.rate(49, 48), 2500.0);
        assert_eq!(g.row(49).len(), 1);
        g.check().unwrap();
        // pi_i proportional to mu_i = 1/((i+1)!)^2.
        assert_relative_eq!(g.pi()[1] / g.pi()[0], 0.25, max_relative = 1e-14);
        assert_relative_eq!(g.pi()[3] / g.pi()[0], 1.0 / 576.0, max_relative = 1e-13);
    }

    #[test]
    fn single_death_redirects_long_jumps() {
        let sd = SingleDeathSpec::new(3, &[(0, 2, 1.0), (1, 0, 1.0), (2, 1, 1.0), (1, 2, 0.5)], None).unwrap();
        let g = truncate_single_death(&sd, 3).unwrap();
        assert_eq!(g.boundary, Boundary::Exact);
        assert!(!g.is_reversible());
        g.check().unwrap();
        let bd = BirthDeathSpec::from_text("1", "i", None).unwrap();
        let sd = SingleDeathSpec::from_birth_death(&bd, 4).unwrap();
        let g = truncate_single_death(&sd, 6).unwrap();
        assert_eq!(g.rate(5, 4), 5.0);
        assert_eq!(g.row(5).len(), 1);
        assert!(g.is_reversible());
    }

    #[test]
    fn reflecting_mesh_rows_sum_to_zero() {
        let d = DiffusionSpec::from_text("1", "0").unwrap();
        let g = discretize_diffusion(&d, 1.0, 11).unwrap();
        let q = g.to_dense();
        for i in 0..11 {
            assert!(q.row(i).sum().abs() < 1e-9);
        }
        g.check().unwrap();
        // Strong drift forces exponential fitting but keeps a generator.
        let d = DiffusionSpec::from_text("1", "-4*x^3").unwrap();
        let g = discretize_diffusion(&d, 4.0, 41).unwrap();
        assert!(g.row(39).iter().all(|e| e.1 > 0.0));
        g.check().unwrap();
    }

    #[test]
    fn random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..10 {
            let g = random_reversible(n, 0.4, &mut rng).unwrap();
            assert!(g.is_reversible(), "{:?}", g.reversibility_defect());
            g.check().unwrap();
            let h = random_chain(n, 0.5, &mut rng).unwrap();
            h.check().unwrap();
        }
    }

    #[test]
    fn dense_round_trip_and_errors() {
        let q = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.5, -1.0, 0.5, 0.0, 2.0, -2.0]);
        let g = GeneratorMatrix::from_dense(&q, Boundary::Exact).unwrap();
        assert_eq!(g.to_dense(), q);
        assert!(g.is_tridiagonal());
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -1.0]);
        assert!(GeneratorMatrix::from_dense(&bad, Boundary::Exact).is_err());
        let split = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(GeneratorMatrix::from_dense(&split, Boundary::Exact), Err(Error::Reducible(_))));
    }

    #[test]
    fn ornstein_uhlenbeck_modes() {
        // f'' - x f': Hermite eigenvalues 1, 2, ... on the line; the
        // reflecting half line keeps the even modes only.
        let ou = DiffusionSpec::from_text("1", "-x").unwrap();
        let line = discretize_diffusion_interval(&ou, -8.0, 8.0, 3201).unwrap();
        assert_relative_eq!(crate::oracle::spectral_gap(&line).unwrap(), 1.0, max_relative = 1e-3);
        let half = discretize_diffusion(&ou, 8.0, 1601).unwrap();
        assert_relative_eq!(crate::oracle::spectral_gap(&half).unwrap(), 2.0, max_relative = 1e-3);
        assert!(discretize_diffusion_interval(&ou, 1.0, 1.0, 10).is_err());
    }
}
