//! Nearest-neighbour chains on rooted trees, possibly with infinite rays.
//!
//! With `mu` the reversible measure normalized at the root, the subtree
//! weight of `j` relative to `mu_j` obeys
//! `omega_j = 1 + sum_{c child of j} (up_c / down_c) omega_c + (ray masses)`,
//! and `m_j = omega_j / down_j` is the mean time to step from the subtree of
//! `j` to its parent. The bound is `S = sup` over paths from the root of the
//! accumulated `m_j`.
//!
//! Along a ray the same quantities form a birth-death chain hanging off the
//! explicit node, so ray tails reuse the ratio recursions of that case.

use serde::Serialize;

use super::{BoundSource, RateBounds};
use crate::model::{TreeRay, TreeSpec};
use crate::numerics::{sum_series, Tolerance};
use crate::{Error, Result};

/// `sum_{k>=1} prod_{t=1}^{k} up(d+t)/down(d+t)`: ray mass beyond depth `d`
/// relative to the node at depth `d`.
fn ray_mass(ray: &TreeRay, d: usize, tol: &Tolerance) -> Result<f64> {
    let mut ratio = 1.0;
    let r = sum_series(
        |k| {
            let depth = (d + k + 1) as f64;
            ratio *= ray.up.eval(depth) / ray.down.eval(depth);
            ratio
        },
        tol,
    )?;
    r.finite(&format!("ray mass below depth {d} from node {}", ray.from))
}

/// `sum_{e > d} m_e` over ray nodes deeper than `d`, by the forward
/// recursion `E_j = (up E_{j-1} + 1) / down` of the hanging birth-death chain.
fn ray_tail(ray: &TreeRay, d: usize, tol: &Tolerance) -> Result<f64> {
    let mut e = 0.0;
    let r = sum_series(
        |k| {
            let depth = (d + k + 1) as f64;
            e = (ray.up.eval(depth) * e + 1.0) / ray.down.eval(depth);
            e
        },
        tol,
    )?;
    r.finite(&format!("ray path sum below depth {d} from node {}", ray.from))
}

/// `m_e` for the ray node at depth `e`.
pub fn tree_ray_m(ray: &TreeRay, depth: usize, tol: &Tolerance) -> Result<f64> {
    Ok((1.0 + ray_mass(ray, depth, tol)?) / ray.down.eval(depth as f64))
}

/// Relative subtree weights `omega_j` of the explicit nodes.
fn subtree_weights(spec: &TreeSpec, tol: &Tolerance) -> Result<Vec<f64>> {
    let n = spec.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&j| std::cmp::Reverse(spec.depth(j)));
    let mut omega = vec![0.0; n];
    for j in order {
        let mut w = 1.0;
        for &c in spec.children(j) {
            let node = &spec.nodes[c];
            w += node.up / node.down * omega[c];
        }
        for ray in spec.rays_from(j) {
            w += ray_mass(ray, spec.depth(j), tol)?;
        }
        if !w.is_finite() {
            return Err(Error::Divergent(format!("subtree weight of node {j} is infinite")));
        }
        omega[j] = w;
    }
    Ok(omega)
}

/// `m_j = (mu_j q_{j, parent})^{-1} sum_{l in subtree(j)} mu_l` for an
/// explicit non-root node.
pub fn tree_m(spec: &TreeSpec, j: usize, tol: &Tolerance) -> Result<f64> {
    if j == 0 || j >= spec.len() {
        return Err(Error::invalid(format!("m_j is defined for non-root explicit nodes, got {j}")));
    }
    let omega = subtree_weights(spec, tol)?;
    Ok(omega[j] / spec.nodes[j].down)
}

/// `H_n`: union of the root paths cut where the remaining path sum drops to
/// `1/n`, so every state outside it reaches `H_n` in mean time `<= 1/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSet {
    pub n: usize,
    pub explicit_nodes: Vec<usize>,
    /// `(ray index, deepest included depth)` for rays entered by `H_n`.
    pub ray_depths: Vec<(usize, usize)>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSummary {
    pub s: f64,
    /// `m_j` for explicit nodes; entry 0 (the root) is 0.
    pub m: Vec<f64>,
    /// Path sum from the root to each explicit node.
    pub prefix: Vec<f64>,
    /// Full path sum through each ray.
    pub ray_sums: Vec<f64>,
    pub hitting_sets: Vec<HittingSet>,
}

/// Levels `n` for which `H_n` is materialized.
const LEVELS: [usize; 6] = [1, 2, 4, 8, 16, 32];

pub fn tree_summary(spec: &TreeSpec, tol: &Tolerance) -> Result<TreeSummary> {
    let n = spec.len();
    let omega = subtree_weights(spec, tol)?;
    let mut m = vec![0.0; n];
    let mut prefix = vec![0.0; n];
    let mut order: Vec<usize> = (1..n).collect();
    order.sort_by_key(|&j| spec.depth(j));
    for &j in &order {
        m[j] = omega[j] / spec.nodes[j].down;
        let p = spec.nodes[j].parent.expect("non-root");
        prefix[j] = prefix[p] + m[j];
    }
    let ray_tails: Vec<f64> = spec
        .rays
        .iter()
        .map(|r| ray_tail(r, spec.depth(r.from), tol))
        .collect::<Result<_>>()?;
    let ray_sums: Vec<f64> = spec.rays.iter().zip(&ray_tails).map(|(r, t)| prefix[r.from] + t).collect();

    // A path ends at an explicit leaf without rays, or runs down a ray.
    let leaf_ends: Vec<usize> = (0..n)
        .filter(|&j| spec.children(j).is_empty() && spec.rays_from(j).next().is_none())
        .collect();
    let s = leaf_ends
        .iter()
        .map(|&j| prefix[j])
        .chain(ray_sums.iter().copied())
        .fold(0.0, f64::max);
    if s <= 0.0 {
        return Err(Error::invalid("tree has a single state; no path to bound"));
    }

    let mut hitting_sets = Vec::with_capacity(LEVELS.len());
    for &level in &LEVELS {
        let eps = 1.0 / level as f64;
        let mut inside = vec![false; n];
        inside[0] = true;
        let mark_path = |mut j: usize, inside: &mut Vec<bool>| {
            while !inside[j] {
                inside[j] = true;
                j = spec.nodes[j].parent.expect("root is marked");
            }
        };
        for &leaf in &leaf_ends {
            // First node along the root path whose remaining sum is <= eps.
            let total = prefix[leaf];
            let mut path = vec![leaf];
            while let Some(p) = spec.nodes[*path.last().unwrap()].parent {
                path.push(p);
            }
            path.reverse();
            if let Some(&cut) = path.iter().find(|&&j| total - prefix[j] <= eps) {
                mark_path(cut, &mut inside);
            }
        }
        let mut ray_depths = Vec::new();
        for (k, ray) in spec.rays.iter().enumerate() {
            let base = spec.depth(ray.from);
            let total = ray_sums[k];
            // Explicit part of the path first.
            let mut path = vec![ray.from];
            while let Some(p) = spec.nodes[*path.last().unwrap()].parent {
                path.push(p);
            }
            path.reverse();
            if let Some(&cut) = path.iter().find(|&&j| total - prefix[j] <= eps) {
                mark_path(cut, &mut inside);
                continue;
            }
            mark_path(ray.from, &mut inside);
            let depth = ray_cut(ray, base, eps, tol)?;
            ray_depths.push((k, depth));
        }
        let explicit_nodes: Vec<usize> = (0..n).filter(|&j| inside[j]).collect();
        let size = explicit_nodes.len() + ray_depths.iter().map(|(k, d)| d - spec.depth(spec.rays[*k].from)).sum::<usize>();
        hitting_sets.push(HittingSet {
            n: level,
            explicit_nodes,
            ray_depths,
            size,
        });
    }
    Ok(TreeSummary {
        s,
        m,
        prefix,
        ray_sums,
        hitting_sets,
    })
}

/// Smallest depth `d > base` with ray tail below `d` at most `eps`.
fn ray_cut(ray: &TreeRay, base: usize, eps: f64, tol: &Tolerance) -> Result<usize> {
    let mut lo = base;
    let mut step = 1usize;
    let mut hi = base + step;
    while ray_tail(ray, hi, tol)? > eps {
        lo = hi;
        step *= 2;
        hi = base + step;
        if step > 1 << 40 {
            return Err(Error::Inconclusive(format!("ray from node {} never gets below {eps}", ray.from)));
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ray_tail(ray, mid, tol)? > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `kappa = lambda1 >= 1/S`.
pub fn tree_bounds(spec: &TreeSpec, tol: &Tolerance) -> Result<(RateBounds, TreeSummary)> {
    let summary = tree_summary(spec, tol)?;
    let lower = 1.0 / summary.s;
    let mut b = RateBounds {
        kappa_lower: lower,
        kappa_equals_lambda1: true,
        lambda1_lower: Some(lower),
        m_h: Some(summary.s),
        hitting_set: Some("{root}".into()),
        s: Some(summary.s),
        ..Default::default()
    };
    b.record("lambda1_lower", BoundSource::TreePathSum, lower, None);
    b.record("kappa_lower", BoundSource::TreePathSum, lower, None);
    for h in &summary.hitting_sets {
        b.notes.push(format!("H_{} has {} states", h.n, h.size));
    }
    b.check()?;
    Ok((b, summary))
}
