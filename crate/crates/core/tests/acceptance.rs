//! Acceptance suite: one pass/fail line per criterion, with pinned
//! tolerances and runtime budgets. Runs without the libtest harness so the
//! lines appear in `cargo test` output.
//!
//! Exit status is nonzero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`. Known failures still print FAIL; the reasons are in the
//! decision notes.

use std::time::{Duration, Instant};

use ergo_core::chain_bounds::{
    bd_delta, bd_s_profile, bd_s_summand, mc1_bound, sd_s, tree_bounds, tree_m, tree_ray_m,
};
use ergo_core::continuum_bounds::{
    diff_delta, quartic_estimate, stable_delta_r, tc_green, tc_hit_moment, tc_integral, tc_omega,
};
use ergo_core::model::{
    BirthDeathSpec, DiffusionSpec, DriftProfile, RateFunction, SingleDeathSpec, StableSdeSpec, TimeChangedStableSpec,
    TreeSpec,
};
use ergo_core::montecarlo::{em_diffusion_hitting, mc_hitting, RngConfig};
use ergo_core::numerics::Tolerance;
use ergo_core::oracle::{
    check_main_lemma, discretize_diffusion, discretize_diffusion_interval, hitting_moment_orders, hitting_moments,
    kappa_empirical, random_chain, random_reversible, spectral_gap, survival, truncate_birth_death, Boundary,
    GeneratorMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail, with the reason.
const KNOWN_FAILURES: &[(usize, &str)] = &[(
    3,
    "lambda1 <= 1/delta does not hold for the reflecting chain; 1/delta bounds the gap killed at 0",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Result<Outcome, String>;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn fmt_ok(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}

// 1. Quartic diffusion: printed terms and the kappa bound.
fn quartic_terms() -> Result<Outcome, String> {
    let est = quartic_estimate(&tol()).map_err(|e| e.to_string())?;
    let head_ok = (est.head_closed - 0.7203).abs() < 5e-5;
    let tail_ok = (est.tail_bound - 0.125).abs() < 5e-5;
    let rate = 1.0 / est.bound;
    let rate_ok = (rate - 1.1831).abs() <= 5e-4;
    let spec = DiffusionSpec::from_text("1", "-4*x^3").map_err(|e| e.to_string())?;
    let d = diff_delta(&spec, &tol()).map_err(|e| e.to_string())?;
    let direct = 0.25 / d.delta;
    let direct_ok = direct >= 1.1831;
    Ok(Outcome {
        pass: head_ok && tail_ok && rate_ok && direct_ok,
        detail: format!(
            "head {:.6} (0.7203 +- 5e-5: {}), tail {:.6} (0.125: {}), 1/(head+tail) = {:.5} (1.1831 +- 5e-4: {}), \
             direct 1/(4 delta) = {:.5} with delta = {:.6} (>= 1.1831: {}); M_0 = {:.6}",
            est.head_closed,
            fmt_ok(head_ok),
            est.tail_bound,
            fmt_ok(tail_ok),
            rate,
            fmt_ok(rate_ok),
            direct,
            d.delta,
            fmt_ok(direct_ok),
            est.head_exact + est.tail_exact,
        ),
    })
}

// 2. Quartic diffusion: mesh gap of the whole-line process.
fn quartic_mesh_gap() -> Result<Outcome, String> {
    let spec = DiffusionSpec::from_text("1", "-4*x^3").map_err(|e| e.to_string())?;
    let gap_at = |h: f64| -> Result<f64, String> {
        let points = (8.0 / h).round() as usize + 1;
        let q = discretize_diffusion_interval(&spec, -4.0, 4.0, points).map_err(|e| e.to_string())?;
        spectral_gap(&q).map_err(|e| e.to_string())
    };
    let coarse = gap_at(1e-3)?;
    let fine = gap_at(5e-4)?;
    let half = spectral_gap(&discretize_diffusion(&spec, 4.0, 4001).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let delta = (fine - coarse).abs();
    Ok(Outcome {
        pass: coarse >= 2.40 && delta < 1e-3,
        detail: format!(
            "gap on [-4,4] reflecting, h=1e-3: {coarse:.6} (>= 2.40: {}), h=5e-4: {fine:.6}, change {delta:.2e} (< 1e-3: {}); \
             reflecting [0,4] gap (even modes only) {half:.4}",
            fmt_ok(coarse >= 2.40),
            fmt_ok(delta < 1e-3),
        ),
    })
}

// 3. Birth-death sandwich for b = 1, a = (i+1)^2.
fn birth_death_sandwich() -> Result<Outcome, String> {
    let bd = BirthDeathSpec::from_text("1", "(i+1)^2", None).map_err(|e| e.to_string())?;
    let delta = bd_delta(&bd, &tol()).map_err(|e| e.to_string())?.delta;
    let profile = bd_s_profile(&bd, &tol()).map_err(|e| e.to_string())?;
    let gap = |n: usize| -> Result<f64, String> {
        spectral_gap(&truncate_birth_death(&bd, n).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    };
    let (g400, g800) = (gap(400)?, gap(800)?);
    let q400 = truncate_birth_death(&bd, 400).map_err(|e| e.to_string())?;
    let killed = ergo_core::oracle::dirichlet_gap(&q400, 0).map_err(|e| e.to_string())?;
    let hardy_lo = 0.25 / delta <= g400;
    let hardy_hi = g400 <= 1.0 / delta;
    let s_chain = 1.0 / profile.s <= profile.lambda1_lower() && profile.lambda1_lower() <= g400;
    let cauchy = (g400 - g800).abs() < 1e-6;
    Ok(Outcome {
        pass: hardy_lo && hardy_hi && s_chain && cauchy,
        detail: format!(
            "(4 delta)^-1 = {:.5} <= gap {g400:.6}: {}; gap <= delta^-1 = {:.5}: {}; \
             1/S = {:.5} <= 1/min max(S_i, Sbar_i) = {:.5} <= gap: {}; |gap(400) - gap(800)| = {:.1e} (< 1e-6): {}; \
             [killed-at-0 gap {killed:.5} <= delta^-1: {}]",
            0.25 / delta,
            fmt_ok(hardy_lo),
            1.0 / delta,
            fmt_ok(hardy_hi),
            1.0 / profile.s,
            profile.lambda1_lower(),
            fmt_ok(s_chain),
            (g400 - g800).abs(),
            fmt_ok(cauchy),
            fmt_ok(killed <= 1.0 / delta),
        ),
    })
}

/// Reversible chains shared by criteria 4, 7 and 11.
fn chain_suite() -> Result<Vec<(&'static str, GeneratorMatrix)>, String> {
    let two = GeneratorMatrix::from_rates(2, &[(0, 1, 1.0), (1, 0, 1.0)], Boundary::Exact).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let five = random_reversible(5, 0.5, &mut rng).map_err(|e| e.to_string())?;
    let bd = BirthDeathSpec::from_text("1", "(i+1)^2", None).map_err(|e| e.to_string())?;
    let trunc = truncate_birth_death(&bd, 12).map_err(|e| e.to_string())?;
    Ok(vec![("two-state", two), ("random 5-state", five), ("birth-death N=12", trunc)])
}

// 4. kappa = lambda1 on reversible chains, and min{lambda1, 1/M_H} <= kappa.
fn kappa_equals_gap() -> Result<Outcome, String> {
    let mut worst_eq = 0.0f64;
    let mut worst_floor = f64::INFINITY;
    let mut parts = Vec::new();
    for (name, q) in chain_suite()? {
        let gap = spectral_gap(&q).map_err(|e| e.to_string())?;
        let k = kappa_empirical(&q, None).map_err(|e| e.to_string())?.rate;
        let rel = (k - gap).abs() / gap;
        worst_eq = worst_eq.max(rel);
        let n = q.len();
        let mut targets: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
        targets.extend((1..n - 1).map(|k| (0..=k).collect()));
        for h in targets {
            let m = hitting_moments(&q, &h, 1).map_err(|e| e.to_string())?.into_iter().fold(0.0, f64::max);
            let floor = gap.min(1.0 / m);
            worst_floor = worst_floor.min(k * 1.01 - floor);
        }
        parts.push(format!("{name}: gap {gap:.6} kappa {k:.6}"));
    }
    Ok(Outcome {
        pass: worst_eq <= 0.01 && worst_floor >= 0.0,
        detail: format!(
            "{}; max |kappa - gap|/gap = {worst_eq:.2e} (<= 1%); min over H of 1.01 kappa - min(gap, 1/M_H) = {worst_floor:.3e} (>= 0)",
            parts.join(", ")
        ),
    })
}

// 5. Single-state hitting bound on random reversible chains.
fn hitting_bound_random() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=12);
        let q = random_reversible(n, 0.4, &mut rng).map_err(|e| e.to_string())?;
        let b = mc1_bound(&q).map_err(|e| e.to_string())?.value;
        let gap = spectral_gap(&q).map_err(|e| e.to_string())?;
        let k = kappa_empirical(&q, None).map_err(|e| e.to_string())?.rate;
        worst = worst.max(b / gap).max(b / k);
        if b > gap * (1.0 + 1e-9) || b > k * 1.01 {
            violations += 1;
        }
    }
    Ok(Outcome {
        pass: violations == 0,
        detail: format!(
            "50 chains of size 2..12: {violations} violations of bound <= gap (rel 1e-9) and bound <= kappa_empirical (rel 1%); \
             largest ratio {worst:.4}"
        ),
    })
}

// 6. Main-lemma inequality on random chains.
fn main_lemma_random() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let times = [0.1, 0.5, 1.0, 2.0, 5.0];
    let (mut violations, mut inconclusive, mut worst_share) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let q = random_chain(6, 0.5, &mut rng).map_err(|e| e.to_string())?;
        for &t in &times {
            match check_main_lemma(&q, &[0], t) {
                Ok(r) => {
                    violations += r.violations();
                    for c in &r.checks {
                        if c.rhs > 0.0 {
                            worst_share = worst_share.max(c.allowance / c.rhs);
                        }
                    }
                }
                Err(_) => inconclusive += 1,
            }
        }
    }
    Ok(Outcome {
        pass: violations == 0 && inconclusive == 0,
        detail: format!(
            "100 chains x 5 times: {violations} violations, {inconclusive} inconclusive; largest allowance/RHS {worst_share:.3}"
        ),
    })
}

// 7. Moment, tail and submultiplicativity checks.
fn moments_and_tails() -> Result<Outcome, String> {
    let mut suite = chain_suite()?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    suite.push(("random 6-state non-reversible", random_chain(6, 0.5, &mut rng).map_err(|e| e.to_string())?));
    let mut violations = 0usize;
    let mut checks = 0usize;
    for (_, q) in &suite {
        let orders = hitting_moment_orders(q, &[0], 4).map_err(|e| e.to_string())?;
        let m = orders[0].iter().copied().fold(0.0, f64::max);
        let mut fact = 1.0;
        for (k, u) in orders.iter().enumerate() {
            fact *= (k + 1) as f64;
            let top = u.iter().copied().fold(0.0, f64::max);
            checks += 1;
            if top > fact * m.powi(k as i32 + 1) * (1.0 + 1e-9) {
                violations += 1;
            }
        }
        let times: Vec<f64> = (1..=40).map(|j| j as f64 * 0.25 * m).collect();
        let mut sup = vec![0.0f64; times.len()];
        for x in 1..q.len() {
            let p = survival(q, &[0], x, &times).map_err(|e| e.to_string())?;
            for (j, &v) in p.iter().enumerate() {
                sup[j] = sup[j].max(v);
                for c in [0.5, 0.9] {
                    let beta = c / m;
                    checks += 1;
                    if v > (-beta * times[j]).exp() / (1.0 - beta * m) * (1.0 + 1e-9) + 1e-12 {
                        violations += 1;
                    }
                }
            }
        }
        // times[4k - 1] = k M.
        let d1 = sup[3];
        for k in 1..=5usize {
            checks += 1;
            if sup[4 * k - 1] > d1.powi(k as i32) * (1.0 + 1e-9) + 1e-14 {
                violations += 1;
            }
        }
    }
    Ok(Outcome {
        pass: violations == 0,
        detail: format!("{} chains, {checks} checks (E tau^n <= n! M^n, tail <= e^(-beta t)/(1 - beta M), delta(k t0) <= delta(t0)^k): {violations} violations", suite.len()),
    })
}

// 8. Time-changed stable process.
fn time_changed_stable() -> Result<Outcome, String> {
    let alphas: Vec<f64> = (1..20).map(|k| 1.0 + 0.05 * k as f64).collect();
    let omega_ok = alphas.iter().all(|&a| tc_omega(a).is_ok_and(|w| w > 0.0 && w.is_finite()));
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut green_bad = 0;
    for _ in 0..10_000 {
        let a = rng.random_range(1.001..1.999);
        let x = rng.random_range(-50.0..50.0);
        let y = rng.random_range(-50.0..50.0);
        let g = tc_green(a, x, y).map_err(|e| e.to_string())?;
        let gs = tc_green(a, y, x).map_err(|e| e.to_string())?;
        let cap = 0.5 * tc_omega(a).map_err(|e| e.to_string())? * f64::min(x.abs(), y.abs()).powf(a - 1.0);
        if !(g >= 0.0) || g != gs || g > cap * (1.0 + 1e-12) + 1e-300 {
            green_bad += 1;
        }
    }
    let speed = |alpha: f64, a: &str| -> Result<TimeChangedStableSpec, String> {
        TimeChangedStableSpec::new(alpha, RateFunction::parse(a, "x").map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    };
    let mut threshold_bad = Vec::new();
    for alpha in [1.2, 1.5, 1.8] {
        for beta in [0.5, 1.0, 1.0 + 0.5 * (alpha - 1.0), alpha + 0.25, 2.5, 3.0] {
            let finite = match tc_integral(&speed(alpha, &format!("(1+abs(x))^{beta}"))?, &tol()) {
                Ok(v) => v.is_finite(),
                Err(e) if e.is_divergence() => false,
                Err(e) => return Err(e.to_string()),
            };
            if finite != (beta > alpha) {
                threshold_bad.push(format!("alpha={alpha} beta={beta}"));
            }
        }
    }
    let s = speed(1.5, "(1+abs(x))^2")?;
    let cap = tc_omega(1.5).map_err(|e| e.to_string())? * tc_integral(&s, &tol()).map_err(|e| e.to_string())?;
    let mut hit_bad = 0;
    for j in 0..20 {
        let x = -10.0 + 20.0 * j as f64 / 19.0;
        if tc_hit_moment(&s, x, &tol()).map_err(|e| e.to_string())? > cap * (1.0 + 1e-10) {
            hit_bad += 1;
        }
    }
    Ok(Outcome {
        pass: omega_ok && green_bad == 0 && threshold_bad.is_empty() && hit_bad == 0,
        detail: format!(
            "omega > 0 on 19 alphas: {}; Green function 1e4 triples: {green_bad} violations; \
             integral finite iff beta > alpha on 18 pairs: {} mismatches {:?}; hit moment <= omega I = {cap:.5} on 20 points: {hit_bad} violations",
            fmt_ok(omega_ok),
            threshold_bad.len(),
            threshold_bad,
        ),
    })
}

// 9. Stable-driven SDE threshold in eta.
fn stable_threshold() -> Result<Outcome, String> {
    let mut line = Vec::new();
    let mut pass = true;
    for eta in [-0.5, 0.0, 0.25, 1.0, 2.0] {
        let b = RateFunction::parse(&format!("-x*abs(x)^({eta})"), "x").map_err(|e| e.to_string())?;
        let spec = StableSdeSpec::new(1.5, 1, DriftProfile::Drift(b)).map_err(|e| e.to_string())?;
        let finite = match stable_delta_r(&spec, 2.0, &tol()) {
            Ok(v) => Some(v),
            Err(e) if e.is_divergence() => None,
            Err(e) => return Err(e.to_string()),
        };
        pass &= finite.is_some() == (eta > 0.0);
        line.push(match finite {
            Some(v) => format!("eta={eta}: {v:.5}"),
            None => format!("eta={eta}: inf"),
        });
    }
    Ok(Outcome {
        pass,
        detail: format!("delta_2 finite exactly for eta > 0: {}", line.join(", ")),
    })
}

// 10. Single-death and tree reductions agree with the birth-death series.
fn cross_module() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst_sd = 0.0f64;
    let mut worst_tree = 0.0f64;
    for _ in 0..20 {
        let b0 = rng.random_range(0.5..2.0);
        let p = rng.random_range(0.0..1.0);
        let a0 = rng.random_range(0.5..2.0);
        let q = rng.random_range(1.8..3.0);
        let bd = BirthDeathSpec::from_text(&format!("{b0}*(1+i)^{p}"), &format!("{a0}*(i+1)^{q}"), None)
            .map_err(|e| e.to_string())?;
        let s_bd = bd_s_profile(&bd, &tol()).map_err(|e| e.to_string())?.s;
        let sd = SingleDeathSpec::from_birth_death(&bd, 5).map_err(|e| e.to_string())?;
        let s_sd = sd_s(&sd, &tol()).map_err(|e| e.to_string())?;
        worst_sd = worst_sd.max((s_sd - s_bd).abs() / s_bd);

        let tree = TreeSpec::path_from_birth_death(&bd, 12).map_err(|e| e.to_string())?;
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        for j in 1..12 {
            let m = tree_m(&tree, j, &tol()).map_err(|e| e.to_string())?;
            worst_tree = worst_tree.max(rel(m, bd_s_summand(&bd, j, &tol()).map_err(|e| e.to_string())?));
        }
        for d in [12, 20, 40] {
            let m = tree_ray_m(&tree.rays[0], d, &tol()).map_err(|e| e.to_string())?;
            worst_tree = worst_tree.max(rel(m, bd_s_summand(&bd, d, &tol()).map_err(|e| e.to_string())?));
        }
        let lower = tree_bounds(&tree, &tol()).map_err(|e| e.to_string())?.0.kappa_lower;
        worst_tree = worst_tree.max(rel(lower, 1.0 / s_bd));
    }
    Ok(Outcome {
        pass: worst_sd <= 1e-8 && worst_tree <= 1e-8,
        detail: format!(
            "20 random instances: max rel |S_sd - S_bd| = {worst_sd:.2e} (<= 1e-8); path-graph terms and 1/S max rel diff {worst_tree:.2e} (<= 1e-8)"
        ),
    })
}

// 11. Monte Carlo against linear solves.
fn monte_carlo() -> Result<Outcome, String> {
    let rng = RngConfig { seed: 1111, streams: 64 };
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, q) in chain_suite()? {
        let x0 = q.len() - 1;
        let exact = hitting_moments(&q, &[0], 1).map_err(|e| e.to_string())?[x0];
        let est = mc_hitting(&q, x0, &[0], 100_000, None, 1e6, &rng).map_err(|e| e.to_string())?;
        let ok = (est.mean - exact).abs() <= 3.0 * est.std_error && est.censored == 0;
        pass &= ok;
        lines.push(format!("{name}: {:.5} +- {:.5} vs {exact:.5} {}", est.mean, est.std_error, fmt_ok(ok)));
    }
    let bd = BirthDeathSpec::from_text("1", "(i+1)^2", None).map_err(|e| e.to_string())?;
    let exact = hitting_moments(&truncate_birth_death(&bd, 400).map_err(|e| e.to_string())?, &[0], 1)
        .map_err(|e| e.to_string())?[5];
    let est = mc_hitting(&bd, 5, &[0], 100_000, None, 1e6, &rng.offset(3)).map_err(|e| e.to_string())?;
    let ok = (est.mean - exact).abs() <= 3.0 * est.std_error;
    pass &= ok;
    lines.push(format!("infinite birth-death from 5: {:.5} +- {:.5} vs {exact:.5} {}", est.mean, est.std_error, fmt_ok(ok)));

    let ou = DiffusionSpec::from_text("1", "-x").map_err(|e| e.to_string())?;
    let h = 1e-3;
    let g = discretize_diffusion(&ou, 8.0, 8001).map_err(|e| e.to_string())?;
    let target: Vec<usize> = (0..=500).collect();
    let mesh = hitting_moments(&g, &target, 1).map_err(|e| e.to_string())?[(2.0 / h) as usize];
    let em = em_diffusion_hitting(&ou, 2.0, 0.5, 1e-3, 20_000, 200.0, &rng.offset(4)).map_err(|e| e.to_string())?;
    let ok = em.consistent_with(mesh);
    pass &= ok;
    lines.push(format!(
        "OU x0=2 r=0.5: {:.5} +- {:.5} (Richardson allowance {:.5}) vs mesh {mesh:.5} {}",
        em.fine.mean,
        em.fine.std_error,
        em.bias_allowance,
        fmt_ok(ok)
    ));
    Ok(Outcome { pass, detail: lines.join("; ") })
}

fn main() {
    let criteria: [(usize, &str, Check, Duration); 11] = [
        (1, "quartic diffusion bound terms", quartic_terms, Duration::from_secs(5)),
        (2, "quartic diffusion mesh gap", quartic_mesh_gap, Duration::from_secs(30)),
        (3, "birth-death sandwich", birth_death_sandwich, Duration::from_secs(10)),
        (4, "kappa equals gap on reversible chains", kappa_equals_gap, Duration::from_secs(20)),
        (5, "single-state hitting bound", hitting_bound_random, Duration::from_secs(20)),
        (6, "main-lemma inequality", main_lemma_random, Duration::from_secs(30)),
        (7, "moment and tail suite", moments_and_tails, Duration::from_secs(10)),
        (8, "time-changed stable process", time_changed_stable, Duration::from_secs(10)),
        (9, "stable SDE threshold", stable_threshold, Duration::from_secs(5)),
        (10, "cross-module equivalences", cross_module, Duration::from_secs(10)),
        (11, "Monte Carlo consistency", monte_carlo, Duration::from_secs(60)),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        println!(
            "criterion {id:>2} {} {name} [{:.2}s / budget {}s]: {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
        );
        match (pass, known) {
            (false, Some((_, why))) => println!("             known failure: {why}"),
            (false, None) => unexpected.push(id),
            (true, Some(_)) => println!("             listed as a known failure but passed"),
            (true, None) => {}
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
