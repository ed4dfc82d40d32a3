//! The model families and their validation.

use serde::Serialize;

use super::expr::RateFunction;
use crate::{Error, Result};

/// Indices checked densely when validating rate functions on an infinite
/// index range; beyond this, powers of two up to `2^30` are sampled.
const DENSE_CHECK: usize = 4096;

fn sample_indices(start: usize, end: Option<usize>) -> Vec<usize> {
    let stop = end.unwrap_or(usize::MAX);
    let mut out: Vec<usize> = (start..stop.min(start + DENSE_CHECK)).collect();
    if end.is_none() {
        let mut k = start + DENSE_CHECK;
        while k < (1 << 30) {
            out.push(k);
            k *= 2;
        }
    }
    out
}

fn positive_at(f: &RateFunction, i: usize, what: &str) -> Result<f64> {
    let v = f.eval(i as f64);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            value: v,
            at: format!("{what} rate `{}` at i={i}", f.text()),
        });
    }
    if v <= 0.0 {
        return Err(Error::invariant(
            format!("{what} rate must be positive, `{}` = {v}", f.text()),
            format!("i={i}"),
        ));
    }
    Ok(v)
}

/// Birth-death chain on `{0, 1, ...}` (or `{0, ..., states-1}` when finite)
/// with birth rates `b_i` and death rates `a_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirthDeathSpec {
    pub birth: RateFunction,
    pub death: RateFunction,
    /// Size of a finite state space; `None` for the infinite chain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
}

impl BirthDeathSpec {
    pub fn new(birth: RateFunction, death: RateFunction, states: Option<usize>) -> Result<Self> {
        let spec = BirthDeathSpec {
            birth,
            death,
            states,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses the two rate texts over the index variable `i`.
    pub fn from_text(birth: &str, death: &str, states: Option<usize>) -> Result<Self> {
        Self::new(
            RateFunction::parse(birth, "i")?,
            RateFunction::parse(death, "i")?,
            states,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.states {
            if n < 2 {
                return Err(Error::Schema(format!("a finite chain needs at least 2 states, got {n}")));
            }
        }
        let last_birth = self.states.map(|n| n - 1);
        for i in sample_indices(0, last_birth) {
            positive_at(&self.birth, i, "birth")?;
        }
        for i in sample_indices(1, self.states) {
            positive_at(&self.death, i, "death")?;
        }
        Ok(())
    }

    /// `b_i`, zero at the top state of a finite chain.
    #[inline]
    pub fn birth(&self, i: usize) -> f64 {
        match self.states {
            Some(n) if i + 1 >= n => 0.0,
            _ => self.birth.eval(i as f64),
        }
    }

    /// `a_i`, zero at state 0.
    #[inline]
    pub fn death(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.death.eval(i as f64)
        }
    }

    /// All rates multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        BirthDeathSpec {
            birth: self.birth.scaled(s),
            death: self.death.scaled(s),
            states: self.states,
        }
    }
}

/// Rates of a single-death row beyond the explicit table: one step down and
/// up to `up.len()` steps up, each a function of the current state `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleDeathTail {
    pub down: RateFunction,
    pub up: Vec<RateFunction>,
}

/// Downward skip-free chain: from `i` it moves to `i-1` or to any `j > i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleDeathSpec {
    /// Rows `0..dimension` come from the table.
    pub dimension: usize,
    /// Sparse rows of the explicit table: `(target, rate)` with positive rates.
    pub rows: Vec<Vec<(usize, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<SingleDeathTail>,
}

impl SingleDeathSpec {
    /// Builds the spec from `(i, j, rate)` triples; duplicate entries add.
    pub fn new(dimension: usize, table: &[(usize, usize, f64)], tail: Option<SingleDeathTail>) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::Schema("single-death table needs dimension >= 1".into()));
        }
        let mut rows = vec![Vec::<(usize, f64)>::new(); dimension];
        for &(i, j, q) in table {
            if i >= dimension {
                return Err(Error::Schema(format!(
                    "table row {i} is outside the declared dimension {dimension}"
                )));
            }
            if !q.is_finite() || q < 0.0 {
                return Err(Error::invariant(format!("rate must be finite and >= 0, got {q}"), format!("q[{i}][{j}]")));
            }
            if i == j {
                return Err(Error::Schema(format!("diagonal entry q[{i}][{i}] is implied by the row sum")));
            }
            if j + 1 < i {
                return Err(Error::invariant(
                    "downward jumps longer than one step are not allowed",
                    format!("q[{i}][{j}]"),
                ));
            }
            if q == 0.0 {
                continue;
            }
            match rows[i].iter_mut().find(|(t, _)| *t == j) {
                Some(entry) => entry.1 += q,
                None => rows[i].push((j, q)),
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        let spec = SingleDeathSpec {
            dimension,
            rows,
            tail,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 1..self.dimension {
            if self.down(i) <= 0.0 {
                return Err(Error::invariant("q[i][i-1] must be positive", format!("i={i}")));
            }
        }
        match &self.tail {
            None => {
                for (i, row) in self.rows.iter().enumerate() {
                    if let Some(&(j, _)) = row.iter().find(|&&(j, _)| j >= self.dimension) {
                        return Err(Error::Schema(format!(
                            "row {i} jumps to {j} outside a finite chain of dimension {}",
                            self.dimension
                        )));
                    }
                }
            }
            Some(tail) => {
                if tail.up.is_empty() {
                    log::debug!("single-death tail has no upward jumps");
                }
                for i in sample_indices(self.dimension.max(1), None) {
                    positive_at(&tail.down, i, "tail down")?;
                    for (k, f) in tail.up.iter().enumerate() {
                        let v = f.eval(i as f64);
                        if !v.is_finite() || v < 0.0 {
                            return Err(Error::invariant(
                                format!("tail up rate {} must be finite and >= 0, got {v}", k + 1),
                                format!("i={i}"),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether the state space is `{0, ..., dimension-1}`.
    pub fn is_finite(&self) -> bool {
        self.tail.is_none()
    }

    /// Largest upward jump from row `i`.
    pub fn max_jump(&self) -> usize {
        let table = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, _)| j.saturating_sub(i)))
            .max()
            .unwrap_or(0);
        table.max(self.tail.as_ref().map_or(0, |t| t.up.len()))
    }

    /// Off-diagonal entries of row `i` as `(target, rate)`, positive rates only.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        if i < self.dimension {
            return self.rows[i].clone();
        }
        let Some(tail) = &self.tail else {
            return Vec::new();
        };
        let x = i as f64;
        let mut out = Vec::with_capacity(tail.up.len() + 1);
        out.push((i - 1, tail.down.eval(x)));
        for (k, f) in tail.up.iter().enumerate() {
            let q = f.eval(x);
            if q > 0.0 {
                out.push((i + k + 1, q));
            }
        }
        out
    }

    /// `q_{i,i-1}`.
    pub fn down(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.row(i)
            .iter()
            .find(|&&(j, _)| j + 1 == i)
            .map_or(0.0, |&(_, q)| q)
    }

    /// `q_i^{(k)} = sum_{j >= k} q_{ij}` for `k > i`.
    pub fn up_tail(&self, i: usize, k: usize) -> f64 {
        self.row(i).iter().filter(|&&(j, _)| j >= k).map(|&(_, q)| q).sum()
    }

    /// Embeds a birth-death chain with its first `dimension` rows tabulated.
    pub fn from_birth_death(bd: &BirthDeathSpec, dimension: usize) -> Result<Self> {
        let mut table = Vec::new();
        let n = match bd.states {
            Some(s) => dimension.min(s),
            None => dimension,
        };
        for i in 0..n {
            if i > 0 {
                table.push((i, i - 1, bd.death(i)));
            }
            let b = bd.birth(i);
            if b > 0.0 {
                table.push((i, i + 1, b));
            }
        }
        let tail = match bd.states {
            Some(_) => None,
            None => Some(SingleDeathTail {
                down: bd.death.clone(),
                up: vec![bd.birth.clone()],
            }),
        };
        SingleDeathSpec::new(n, &table, tail)
    }

    pub fn scaled(&self, s: f64) -> Self {
        SingleDeathSpec {
            dimension: self.dimension,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, q)| (j, q * s)).collect())
                .collect(),
            tail: self.tail.as_ref().map(|t| SingleDeathTail {
                down: t.down.scaled(s),
                up: t.up.iter().map(|f| f.scaled(s)).collect(),
            }),
        }
    }
}

/// One explicit node of a tree; `up` is the rate from the parent into this
/// node and `down` the rate back to the parent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub up: f64,
    pub down: f64,
}

/// An infinite path hanging below an explicit node. The edge entering the
/// ray node at depth `d` has rates `up(d)` (towards the ray) and `down(d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeRay {
    pub from: usize,
    pub up: RateFunction,
    pub down: RateFunction,
}

/// Rooted tree with nearest-neighbour jumps. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSpec {
    pub nodes: Vec<TreeNode>,
    pub rays: Vec<TreeRay>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
    #[serde(skip)]
    depth: Vec<usize>,
}

impl TreeSpec {
    pub fn new(nodes: Vec<TreeNode>, rays: Vec<TreeRay>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Schema("tree needs at least a root node".into()));
        }
        if nodes[0].parent.is_some() {
            return Err(Error::Schema("node 0 must be the root (parent null)".into()));
        }
        let mut children = vec![Vec::new(); n];
        for (j, node) in nodes.iter().enumerate().skip(1) {
            let Some(p) = node.parent else {
                return Err(Error::Schema(format!("node {j} has no parent; only node 0 may be the root")));
            };
            if p >= n {
                return Err(Error::Schema(format!("node {j} has parent {p} outside the tree")));
            }
            for (rate, what) in [(node.up, "up"), (node.down, "down")] {
                if !rate.is_finite() || rate <= 0.0 {
                    return Err(Error::invariant(format!("{what} rate must be positive, got {rate}"), format!("node {j}")));
                }
            }
            children[p].push(j);
        }
        // Depths by walking parents; a cycle shows up as a walk longer than n.
        let mut depth = vec![usize::MAX; n];
        depth[0] = 0;
        for j in 1..n {
            let mut path = vec![j];
            let mut cur = j;
            while depth[cur] == usize::MAX {
                cur = nodes[cur].parent.unwrap();
                path.push(cur);
                if path.len() > n + 1 {
                    return Err(Error::Schema(format!("parent links starting at node {j} form a cycle")));
                }
            }
            let mut d = depth[cur];
            for &k in path.iter().rev().skip(1) {
                d += 1;
                depth[k] = d;
            }
        }
        for ray in &rays {
            if ray.from >= n {
                return Err(Error::Schema(format!("ray starts at unknown node {}", ray.from)));
            }
            for k in sample_indices(depth[ray.from] + 1, None) {
                positive_at(&ray.up, k, "ray up")?;
                positive_at(&ray.down, k, "ray down")?;
            }
        }
        Ok(TreeSpec {
            nodes,
            rays,
            children,
            depth,
        })
    }

    /// The path graph `0 - 1 - ... - (n-1)` with birth-death rates, plus a
    /// ray continuing it when the chain is infinite.
    pub fn path_from_birth_death(bd: &BirthDeathSpec, n: usize) -> Result<Self> {
        let n = bd.states.map_or(n, |s| s.min(n)).max(1);
        let mut nodes = vec![TreeNode {
            parent: None,
            up: 0.0,
            down: 0.0,
        }];
        for j in 1..n {
            nodes.push(TreeNode {
                parent: Some(j - 1),
                up: bd.birth(j - 1),
                down: bd.death(j),
            });
        }
        let mut rays = Vec::new();
        if bd.states.is_none() {
            // Ray node at depth d has birth rate b_{d-1} into it and death rate a_d.
            let up = bd.birth.shifted(-1.0);
            rays.push(TreeRay {
                from: n - 1,
                up,
                down: bd.death.clone(),
            });
        }
        TreeSpec::new(nodes, rays)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, j: usize) -> &[usize] {
        &self.children[j]
    }

    pub fn depth(&self, j: usize) -> usize {
        self.depth[j]
    }

    pub fn rays_from(&self, j: usize) -> impl Iterator<Item = &TreeRay> {
        self.rays.iter().filter(move |r| r.from == j)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| TreeNode {
                parent: n.parent,
                up: n.up * s,
                down: n.down * s,
            })
            .collect();
        let rays = self
            .rays
            .iter()
            .map(|r| TreeRay {
                from: r.from,
                up: r.up.scaled(s),
                down: r.down.scaled(s),
            })
            .collect();
        TreeSpec {
            nodes,
            rays,
            children: self.children.clone(),
            depth: self.depth.clone(),
        }
    }
}

/// `L = a(x) d^2/dx^2 + b(x) d/dx` on `[0, inf)`, reflecting at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionSpec {
    pub a: RateFunction,
    pub b: RateFunction,
}

impl DiffusionSpec {
    pub fn new(a: RateFunction, b: RateFunction) -> Result<Self> {
        let spec = DiffusionSpec { a, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_text(a: &str, b: &str) -> Result<Self> {
        Self::new(RateFunction::parse(a, "x")?, RateFunction::parse(b, "x")?)
    }

    pub fn validate(&self) -> Result<()> {
        // Sample on a grid dense near the origin and geometric further out.
        let mut xs: Vec<f64> = (0..=256).map(|k| k as f64 / 64.0).collect();
        let mut x = 4.0;
        while x < 1e6 {
            x *= 1.25;
            xs.push(x);
        }
        for &x in &xs {
            let a = self.a.eval(x);
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::invariant(
                    format!("diffusion coefficient must be positive, a(x) = {a}"),
                    format!("x={x}"),
                ));
            }
            let b = self.b.eval(x);
            if b.is_nan() {
                return Err(Error::NonFinite {
                    value: b,
                    at: format!("drift `{}` at x={x}", self.b.text()),
                });
            }
        }
        Ok(())
    }

    /// The generator multiplied by `s` (both coefficients scaled).
    pub fn scaled(&self, s: f64) -> Self {
        DiffusionSpec {
            a: self.a.scaled(s),
            b: self.b.scaled(s),
        }
    }
}

/// Radial comparison data `(beta(r), r0, D)` for a diffusion on a manifold.
/// `outer = None` means `D = inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSpec {
    pub beta: RateFunction,
    pub r0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
}

impl RadialSpec {
    pub fn new(beta: RateFunction, r0: f64, outer: Option<f64>) -> Result<Self> {
        if !r0.is_finite() || r0 < 0.0 {
            return Err(Error::invariant(format!("r0 must be finite and >= 0, got {r0}"), "r0"));
        }
        if let Some(d) = outer {
            if !(d > r0) {
                return Err(Error::invariant(format!("D must exceed r0, got D={d}"), "D"));
            }
        }
        Ok(RadialSpec { beta, r0, outer })
    }
}

/// How the drift of a stable-driven SDE enters the bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftProfile {
    /// A function of the radius giving `-<x, b(x)> / |x|^2`.
    Radial(RateFunction),
    /// The drift itself, one-dimensional only.
    Drift(RateFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableSdeSpec {
    pub alpha: f64,
    pub dim: usize,
    pub drift: DriftProfile,
}

impl StableSdeSpec {
    pub fn new(alpha: f64, dim: usize, drift: DriftProfile) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invariant(format!("alpha must lie in (0, 2), got {alpha}"), "alpha"));
        }
        if dim < 1 {
            return Err(Error::invariant("dimension must be >= 1", "dim"));
        }
        if matches!(drift, DriftProfile::Drift(_)) && dim != 1 {
            return Err(Error::Schema("a drift function is only accepted for dim = 1; give drift_radial".into()));
        }
        Ok(StableSdeSpec { alpha, dim, drift })
    }

    /// `-<x, b(x)> / |x|^2` at radius `r`, before clipping at zero. For a
    /// one-dimensional drift both signs of `x` are considered.
    pub fn radial_profile(&self, r: f64) -> f64 {
        match &self.drift {
            DriftProfile::Radial(f) => f.eval(r),
            DriftProfile::Drift(b) => {
                let right = -b.eval(r) / r;
                let left = b.eval(-r) / r;
                right.min(left)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChangedStableSpec {
    pub alpha: f64,
    pub a: RateFunction,
}

impl TimeChangedStableSpec {
    pub fn new(alpha: f64, a: RateFunction) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::invariant(format!("alpha must lie in (1, 2), got {alpha}"), "alpha"));
        }
        let mut x = 1.0 / 64.0;
        let mut pts = vec![0.0];
        while x < 1e8 {
            pts.push(x);
            pts.push(-x);
            x *= 1.5;
        }
        for x in pts {
            let v = a.eval(x);
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invariant(format!("time-change speed must be positive, a(x) = {v}"), format!("x={x}")));
            }
        }
        Ok(TimeChangedStableSpec { alpha, a })
    }
}

/// One model of any supported family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    BirthDeath(BirthDeathSpec),
    SingleDeath(SingleDeathSpec),
    Tree(TreeSpec),
    Diffusion(DiffusionSpec),
    RadialDiffusion(RadialSpec),
    StableSde(StableSdeSpec),
    TcStable(TimeChangedStableSpec),
}

impl ModelSpec {
    /// The family tag used in model documents.
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::BirthDeath(_) => "birth_death",
            ModelSpec::SingleDeath(_) => "single_death",
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Diffusion(_) | ModelSpec::RadialDiffusion(_) => "diffusion",
            ModelSpec::StableSde(_) => "stable_sde",
            ModelSpec::TcStable(_) => "tc_stable",
        }
    }

    /// Re-runs the family invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::BirthDeath(s) => s.validate(),
            ModelSpec::SingleDeath(s) => s.validate(),
            ModelSpec::Tree(s) => TreeSpec::new(s.nodes.clone(), s.rays.clone()).map(|_| ()),
            ModelSpec::Diffusion(s) => s.validate(),
            ModelSpec::RadialDiffusion(s) => RadialSpec::new(s.beta.clone(), s.r0, s.outer).map(|_| ()),
            ModelSpec::StableSde(s) => StableSdeSpec::new(s.alpha, s.dim, s.drift.clone()).map(|_| ()),
            ModelSpec::TcStable(s) => TimeChangedStableSpec::new(s.alpha, s.a.clone()).map(|_| ()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn birth_death_rates_and_validation() {
        let bd = BirthDeathSpec::from_text("1", "1", Some(2)).unwrap();
        assert_eq!(bd.birth(0), 1.0);
        assert_eq!(bd.death(1), 1.0);
        assert_eq!(bd.birth(1), 0.0);
        let err = BirthDeathSpec::from_text("1", "0", None).unwrap_err();
        assert!(matches!(err, Error::Invariant { ref at, .. } if at == "i=1"), "{err}");
        let err = BirthDeathSpec::from_text("1", "i - 5000", None).unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }));
    }

    #[test]
    fn single_death_rejects_long_down_jumps() {
        let err = SingleDeathSpec::new(3, &[(1, 0, 1.0), (2, 0, 1.0)], None).unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }));
        let err = SingleDeathSpec::new(3, &[(1, 0, 1.0)], None).unwrap_err();
        assert!(matches!(err, Error::Invariant { ref at, .. } if at == "i=2"));
    }

    #[test]
    fn single_death_rows_and_tails() {
        let bd = BirthDeathSpec::from_text("1", "(i+1)^2", None).unwrap();
        let sd = SingleDeathSpec::from_birth_death(&bd, 3).unwrap();
        assert_eq!(sd.row(1), vec![(0, 4.0), (2, 1.0)]);
        assert_eq!(sd.row(5), vec![(4, 36.0), (6, 1.0)]);
        assert_eq!(sd.up_tail(5, 6), 1.0);
        assert_eq!(sd.up_tail(5, 7), 0.0);
        assert_eq!(sd.max_jump(), 1);
    }

    #[test]
    fn tree_depths_and_cycles() {
        let node = |p: Option<usize>| TreeNode {
            parent: p,
            up: 1.0,
            down: 2.0,
        };
        let t = TreeSpec::new(vec![node(None), node(Some(0)), node(Some(1)), node(Some(0))], vec![]).unwrap();
        assert_eq!(t.depth(2), 2);
        assert_eq!(t.children(0), &[1, 3]);
        let err = TreeSpec::new(vec![node(None), node(Some(2)), node(Some(1))], vec![]).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn path_tree_shifts_birth_rates() {
        let bd = BirthDeathSpec::from_text("i+1", "i^2", None).unwrap();
        let t = TreeSpec::path_from_birth_death(&bd, 4).unwrap();
        assert_eq!(t.nodes[3].up, bd.birth(2));
        // Ray node at depth 4 is entered with b_3.
        assert_eq!(t.rays[0].up.eval(4.0), bd.birth(3));
        assert_eq!(t.rays[0].down.eval(4.0), bd.death(4));
    }

    #[test]
    fn diffusion_requires_positive_a() {
        assert!(DiffusionSpec::from_text("1", "-4*x^3").is_ok());
        let err = DiffusionSpec::from_text("x - 1", "0").unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }));
    }

    #[test]
    fn stable_specs_check_alpha() {
        let b = RateFunction::parse("-x*abs(x)", "x").unwrap();
        assert!(StableSdeSpec::new(1.5, 1, DriftProfile::Drift(b.clone())).is_ok());
        assert!(StableSdeSpec::new(2.0, 1, DriftProfile::Drift(b.clone())).is_err());
        assert!(StableSdeSpec::new(1.5, 2, DriftProfile::Drift(b)).is_err());
        let a = RateFunction::parse("(1+abs(x))^2", "x").unwrap();
        assert!(TimeChangedStableSpec::new(1.5, a.clone()).is_ok());
        assert!(TimeChangedStableSpec::new(0.9, a).is_err());
    }

    #[test]
    fn one_dimensional_drift_profile() {
        let b = RateFunction::parse("-x*abs(x)", "x").unwrap();
        let s = StableSdeSpec::new(1.5, 1, DriftProfile::Drift(b)).unwrap();
        assert!((s.radial_profile(3.0) - 3.0).abs() < 1e-15);
    }
}
