use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ergo_core::chain_bounds::{bd_rate_bounds, combine_bounds, sd_rate_bounds, tree_bounds, BoundSource, Provenance, RateBounds};
use ergo_core::continuum_bounds::{diff_mr, diff_rate_bounds, radial_entrance_bound, stable_rate_bounds, tc_rate_bound};
use ergo_core::model::{load_model, ModelDocument, ModelSpec};
use ergo_core::montecarlo::{em_diffusion_hitting, mc_hitting, JumpRates, RngConfig};
use ergo_core::numerics::Tolerance;
use ergo_core::oracle::{
    check_main_lemma, dirichlet_gap, hitting_moment_orders, kappa_empirical, spectral_gap_report, truncate_generator,
    tv_decay, GeneratorMatrix,
};
use ergo_core::Error;
use sha2::{Digest, Sha256};

use crate::args::{parse_states, BoundsArgs, Common, SimulateArgs, VerifyArgs};
use crate::report::{
    GapResult, HittingResult, KappaResult, LemmaResult, ModelEcho, MonteCarlo, Report, RunInfo, Status, Verdict,
    Verification, SCHEMA_VERSION,
};

pub const DEFAULT_TRUNCATION: usize = 400;
pub const DEFAULT_LENGTH: f64 = 8.0;
pub const DEFAULT_MESH: f64 = 1e-3;
/// Largest uniformization workload (Poisson steps times nonzeros times
/// starting states) attempted for the decay curve.
const DECAY_WORK_CAP: f64 = 5e9;
/// Largest generator for the main-lemma check.
const LEMMA_STATE_CAP: usize = 200;

/// A finished command: the report and the process exit code.
pub struct Outcome {
    pub report: Report,
    pub code: i32,
}

struct Loaded {
    doc: ModelDocument,
    tol: Tolerance,
}

fn load(common: &Common) -> anyhow::Result<Loaded> {
    let doc = load_model(&common.model)?;
    let mut tol = doc.tolerance;
    if let Some(r) = common.tol_rel {
        tol.rel = r;
    }
    if let Some(a) = common.tol_abs {
        tol.abs = a;
    }
    tol.validate()?;
    Ok(Loaded { doc, tol })
}

fn echo(spec: &ModelSpec) -> anyhow::Result<ModelEcho> {
    let value = serde_json::to_value(spec)?;
    let params = value.get("params").cloned().unwrap_or(serde_json::Value::Null);
    let digest = Sha256::digest(serde_json::to_vec(&params)?);
    Ok(ModelEcho {
        family: spec.family().to_string(),
        params_digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
        params,
    })
}

fn run_info(tol: Tolerance) -> RunInfo {
    RunInfo {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        tolerance: tol,
        seed: None,
        streams: None,
        trials: None,
        truncation: None,
        mesh: None,
        length: None,
        times: None,
    }
}

/// The family-appropriate bound set. `Err(Error::Divergent)` means the model
/// is not strongly ergodic.
pub fn family_bounds(spec: &ModelSpec, tol: &Tolerance, lambda1: Option<f64>, level: f64) -> ergo_core::Result<RateBounds> {
    let b = match spec {
        ModelSpec::BirthDeath(s) => bd_rate_bounds(s, tol)?,
        ModelSpec::SingleDeath(s) => sd_rate_bounds(s, tol, lambda1)?,
        ModelSpec::Tree(s) => tree_bounds(s, tol)?.0,
        ModelSpec::Diffusion(s) => diff_rate_bounds(s, tol)?,
        ModelSpec::RadialDiffusion(s) => {
            let p = level.max(s.r0);
            let m = radial_entrance_bound(s, p, tol)?;
            let mut b = RateBounds {
                m_h: Some(m),
                hitting_set: Some(format!("B({p})")),
                ..Default::default()
            };
            b.provenance.push(Provenance {
                bound: "m_h".into(),
                source: BoundSource::UniformHitting,
                value: m,
                detail: Some("radial comparison integral".into()),
            });
            match lambda1 {
                Some(l) => {
                    b.kappa_lower = combine_bounds(l, m)?.0;
                    b.lambda1_lower = Some(l);
                }
                None => b.notes.push("kappa needs --lambda1 for radial models".into()),
            }
            b
        }
        ModelSpec::StableSde(s) => stable_rate_bounds(s, level, lambda1, tol)?,
        ModelSpec::TcStable(s) => tc_rate_bound(s, tol)?,
    };
    b.check()?;
    Ok(b)
}

/// Bounds into the report; the exit code is 2 on a divergence verdict.
fn bounds_section(report: &mut Report, spec: &ModelSpec, tol: &Tolerance, common: &Common) -> anyhow::Result<i32> {
    match family_bounds(spec, tol, common.lambda1, common.level) {
        Ok(b) => {
            report.verdicts.push(Verdict::flag("strongly_ergodic", Status::Pass, "bound computed"));
            report.bounds = Some(b);
            Ok(0)
        }
        Err(e) if e.is_divergence() => {
            report.verdicts.push(Verdict::flag("strongly_ergodic", Status::Fail, e.to_string()));
            report.bounds_error = Some(e.to_string());
            Ok(2)
        }
        Err(e) => Err(e.into()),
    }
}

fn empty_report(command: &str, doc: &ModelDocument, tol: Tolerance) -> anyhow::Result<Report> {
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: command.into(),
        model: echo(&doc.spec)?,
        bounds: None,
        bounds_error: None,
        verification: None,
        montecarlo: None,
        provenance: run_info(tol),
        verdicts: Vec::new(),
    })
}

pub fn cmd_bounds(args: &BoundsArgs) -> anyhow::Result<Outcome> {
    let Loaded { doc, tol } = load(&args.common)?;
    let mut report = empty_report("bounds", &doc, tol)?;
    let code = bounds_section(&mut report, &doc.spec, &tol, &args.common)?;
    Ok(Outcome { report, code })
}

/// How the finite surrogate is built.
#[derive(Debug, Clone, Copy)]
enum Surrogate {
    Chain { states: usize },
    Mesh { h: f64, length: f64 },
}

impl Surrogate {
    fn choose(doc: &ModelDocument, truncate: Option<usize>, mesh: Option<f64>, length: Option<f64>) -> anyhow::Result<Self> {
        match &doc.spec {
            ModelSpec::BirthDeath(_) | ModelSpec::SingleDeath(_) | ModelSpec::Tree(_) => Ok(Surrogate::Chain {
                states: truncate.or(doc.truncation).unwrap_or(DEFAULT_TRUNCATION),
            }),
            ModelSpec::Diffusion(_) | ModelSpec::RadialDiffusion(_) => {
                let h = mesh.unwrap_or(DEFAULT_MESH);
                let length = match (&doc.spec, length) {
                    (_, Some(l)) => l,
                    (ModelSpec::RadialDiffusion(r), None) if r.outer.is_some() => r.outer.unwrap() - r.r0,
                    _ => DEFAULT_LENGTH,
                };
                if !(h > 0.0) || !(length > h) {
                    bail!("need 0 < mesh < length (mesh={h}, length={length})");
                }
                Ok(Surrogate::Mesh { h, length })
            }
            ModelSpec::StableSde(_) | ModelSpec::TcStable(_) => {
                Err(Error::Unsupported(format!("no finite generator for the {} family", doc.spec.family())).into())
            }
        }
    }

    fn points(&self, refine: bool) -> usize {
        match *self {
            Surrogate::Chain { states } => states * if refine { 2 } else { 1 },
            Surrogate::Mesh { h, length } => {
                let h = if refine { 0.5 * h } else { h };
                (length / h).round() as usize + 1
            }
        }
    }

    fn build(&self, spec: &ModelSpec, refine: bool) -> ergo_core::Result<GeneratorMatrix> {
        let length = match *self {
            Surrogate::Mesh { length, .. } => Some(length),
            Surrogate::Chain { .. } => None,
        };
        truncate_generator(spec, self.points(refine), length)
    }

    /// Tolerance for the refinement test on the gap.
    fn cauchy_tolerance(&self) -> f64 {
        match self {
            Surrogate::Chain { .. } => 1e-6,
            Surrogate::Mesh { .. } => 1e-3,
        }
    }

    /// Target indices: chain states, or mesh points at or below a level.
    fn target(&self, hit: Option<&str>, spec: &ModelSpec) -> anyhow::Result<(Vec<usize>, String)> {
        match *self {
            Surrogate::Chain { .. } => {
                let text = hit.unwrap_or("0");
                let states = parse_states(text).map_err(anyhow::Error::msg)?;
                Ok((states, format!("{{{text}}}")))
            }
            Surrogate::Mesh { h, .. } => {
                let left = match spec {
                    ModelSpec::RadialDiffusion(r) => r.r0,
                    _ => 0.0,
                };
                let r: f64 = match hit {
                    Some(t) => t.trim().parse().with_context(|| format!("diffusion target level `{t}` is not a number"))?,
                    None => left,
                };
                let top = ((r - left) / h + 1e-9).floor().max(0.0) as usize;
                Ok(((0..=top).collect(), format!("[{left}, {r}]")))
            }
        }
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<Outcome> {
    let Loaded { doc, tol } = load(&args.common)?;
    let mut report = empty_report("verify", &doc, tol)?;
    let surrogate = Surrogate::choose(&doc, args.truncate, args.mesh, args.length)?;
    let code = bounds_section(&mut report, &doc.spec, &tol, &args.common)?;

    let q = surrogate.build(&doc.spec, false)?;
    let q_fine = surrogate.build(&doc.spec, true)?;
    let n = q.len();
    report.provenance.truncation = Some(n);
    if let Surrogate::Mesh { h, length } = surrogate {
        report.provenance.mesh = Some(h);
        report.provenance.length = Some(length);
    }
    report.provenance.times = args.times.as_ref().map(|t| t.0.clone());

    let gap = spectral_gap_report(&q)?;
    let refined = spectral_gap_report(&q_fine)?.value;
    let cauchy_delta = (refined - gap.value).abs();
    let cauchy_tolerance = surrogate.cauchy_tolerance();
    report.verdicts.push(
        Verdict::at_most("gap_cauchy_under_refinement", cauchy_delta, cauchy_tolerance, 0.0)
            .with_detail(format!("{} vs {} states", n, q_fine.len()))
            .soft(),
    );
    let slack = 2.0 * cauchy_delta + 1e-9 * gap.value;
    let mut verdicts = Vec::new();
    if let Some(b) = &report.bounds {
        if let Some(lo) = b.lambda1_lower {
            verdicts.push(Verdict::at_most("lambda1_lower_le_gap", lo, gap.value, slack));
        }
        if let Some(hi) = b.lambda1_upper {
            verdicts.push(Verdict::at_most("gap_le_lambda1_upper", gap.value, hi, slack));
        }
        if b.dirichlet_lower.is_some() || b.dirichlet_upper.is_some() {
            let killed = dirichlet_gap(&q, 0)?;
            if let Some(lo) = b.dirichlet_lower {
                verdicts.push(Verdict::at_most("dirichlet_lower_le_killed_gap", lo, killed, 1e-6 * killed));
            }
            if let Some(hi) = b.dirichlet_upper {
                verdicts.push(Verdict::at_most("killed_gap_le_dirichlet_upper", killed, hi, 1e-6 * hi));
            }
        }
    }

    let (target, label) = surrogate.target(args.hit.as_deref(), &doc.spec)?;
    if target.iter().any(|&h| h >= n) {
        bail!("target {label} lies outside the {n} retained states");
    }
    let hitting = if target.len() < n {
        let orders = hitting_moment_orders(&q, &target, 4)?;
        let max_moments: Vec<f64> = orders.iter().map(|u| u.iter().copied().fold(0.0, f64::max)).collect();
        let m = max_moments[0];
        let mut factorial = 1.0;
        for (k, &mk) in max_moments.iter().enumerate() {
            factorial *= (k + 1) as f64;
            let bound = factorial * m.powi(k as i32 + 1);
            verdicts.push(Verdict::at_most(&format!("moment_{}_le_factorial_power", k + 1), mk, bound, 1e-9 * bound));
        }
        if let (Some(b), true) = (&report.bounds, target == [0]) {
            if let Some(s) = b.s {
                let rel = if matches!(surrogate, Surrogate::Mesh { .. }) { 1e-3 } else { 1e-8 };
                verdicts.push(
                    Verdict::at_most("hitting_moment_le_s", m, s, rel * s).with_detail("sup_x E_x tau_0 on the surrogate"),
                );
            }
        }
        Some(HittingResult { target: target.clone(), max_moments })
    } else {
        None
    };

    let mut kappa = None;
    let mut decay_csv = None;
    let mut lemma = Vec::new();
    let nnz: usize = (0..n).map(|i| q.row(i).len() + 1).sum();
    // The automatic fit window ends near TV = 1e-10, i.e. around 25 / gap.
    let work = q.max_exit_rate() * (25.0 / gap.value) * nnz as f64 * n as f64;
    if work <= DECAY_WORK_CAP {
        let k = kappa_empirical(&q, None)?;
        if let Some(b) = &report.bounds {
            verdicts.push(Verdict::at_most("kappa_lower_le_kappa_empirical", b.kappa_lower, k.rate, 0.01 * k.rate));
        }
        if q.is_reversible() {
            let diff = (k.rate - gap.value).abs();
            verdicts.push(
                Verdict::at_most("kappa_empirical_equals_gap", diff, 0.01 * gap.value, 0.0)
                    .with_detail(format!("kappa_empirical={} gap={}", k.rate, gap.value)),
            );
        }
        if let Some(m) = hitting.as_ref().map(|h| h.max_moments[0]) {
            let floor = gap.value.min(1.0 / m);
            verdicts.push(Verdict::at_most("min_gap_inverse_m_le_kappa_empirical", floor, k.rate, 0.01 * k.rate));
        }
        kappa = Some(KappaResult {
            rate: k.rate,
            window: k.window,
            r_squared: k.fit.r_squared,
        });
        if let (Some(times), Some(out)) = (&args.times, &args.common.out) {
            let curve = tv_decay(&q, &times.0)?;
            let path = sidecar(out);
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            curve.write_csv(BufWriter::new(file))?;
            decay_csv = Some(path.display().to_string());
        }
    } else {
        verdicts.push(Verdict::flag(
            "kappa_empirical",
            Status::Skipped,
            format!("estimated uniformization work {work:.2e} exceeds {DECAY_WORK_CAP:.0e}"),
        ));
    }
    if n <= LEMMA_STATE_CAP && target.len() < n {
        let times = match &args.times {
            Some(t) => t.0.iter().copied().filter(|&t| t > 0.0).take(5).collect(),
            None => vec![0.5 / gap.value, 1.0 / gap.value, 2.0 / gap.value],
        };
        for t in times {
            let r = check_main_lemma(&q, &target, t)?;
            let worst = r.checks.iter().map(|c| c.rhs + c.allowance - c.lhs).fold(f64::INFINITY, f64::min);
            verdicts.push(Verdict::at_most(&format!("main_lemma_t={t:.4}"), -worst, 0.0, 0.0));
            lemma.push(LemmaResult { t, violations: r.violations(), worst_margin: worst });
        }
    }
    report.verdicts.extend(verdicts);
    report.verification = Some(Verification {
        states: n,
        mesh: report.provenance.mesh,
        length: report.provenance.length,
        gap: GapResult {
            value: gap.value,
            method: format!("{:?}", gap.method).to_lowercase(),
            exact: gap.exact,
            refined,
            refined_states: q_fine.len(),
            cauchy_delta,
            cauchy_tolerance,
        },
        kappa_empirical: kappa,
        hitting,
        main_lemma: lemma,
        decay_csv,
    });
    Ok(Outcome { report, code })
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("decay.csv")
}

pub fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<Outcome> {
    let Loaded { doc, tol } = load(&args.common)?;
    let mut report = empty_report("simulate", &doc, tol)?;
    let rng = RngConfig { seed: args.seed, streams: args.streams };
    report.provenance.seed = Some(rng.seed);
    report.provenance.streams = Some(rng.streams);
    report.provenance.trials = Some(args.trials);
    let surrogate = Surrogate::choose(&doc, args.truncate, args.mesh, args.length)?;
    let bounds = match family_bounds(&doc.spec, &tol, args.common.lambda1, args.common.level) {
        Ok(b) => Some(b),
        Err(e) if e.is_divergence() => {
            report.bounds_error = Some(e.to_string());
            None
        }
        Err(e) => return Err(e.into()),
    };

    let q = surrogate.build(&doc.spec, false)?;
    let (target, label) = surrogate.target(args.hit.as_deref(), &doc.spec)?;
    let mc = match surrogate {
        Surrogate::Chain { .. } => {
            let start = args.start.unwrap_or(1.0);
            if start < 0.0 || start.fract() != 0.0 {
                bail!("chain start state must be a nonnegative integer, got {start}");
            }
            let x0 = start as usize;
            let model: &dyn JumpRates = match &doc.spec {
                ModelSpec::BirthDeath(s) => s,
                ModelSpec::SingleDeath(s) => s,
                _ => &q,
            };
            let est = mc_hitting(model, x0, &target, args.trials, args.beta, args.horizon, &rng)?;
            let reference = if x0 < q.len() && target.iter().all(|&h| h < q.len()) {
                Some(hitting_moment_orders(&q, &target, 1)?[0][x0])
            } else {
                None
            };
            if let Some(r) = reference {
                report.verdicts.push(
                    Verdict::at_most("mc_mean_vs_linear_solve", (est.mean - r).abs(), 3.0 * est.std_error, 0.0)
                        .with_detail(format!("linear solve on {} states: {r}", q.len())),
                );
            }
            if let (Some(s), true) = (bounds.as_ref().and_then(|b| b.s), target == [0]) {
                report.verdicts.push(Verdict::at_most("mc_mean_le_s", est.mean, s, 3.0 * est.std_error));
                if let (Some(e), true) = (est.exp_moment, args.beta.is_some_and(|b| b * s < 1.0)) {
                    let bound = 1.0 / (1.0 - e.beta * s);
                    report.verdicts.push(Verdict::at_most("mc_exp_moment_le_bound", e.mean, bound, 3.0 * e.std_error));
                }
            }
            report.verdicts.push(censoring(est.censored, est.trials));
            MonteCarlo { start, target: label, chain: Some(est), diffusion: None, reference }
        }
        Surrogate::Mesh { h, length } => {
            let ModelSpec::Diffusion(spec) = &doc.spec else {
                bail!("simulation supports one-dimensional diffusions on [0, inf) only");
            };
            report.provenance.mesh = Some(h);
            report.provenance.length = Some(length);
            let r = target.last().copied().unwrap_or(0) as f64 * h;
            let r = args.hit.as_deref().map_or(Ok(r), |t| t.trim().parse::<f64>()).context("diffusion target level")?;
            let start = args.start.unwrap_or(2.0);
            let est = em_diffusion_hitting(spec, start, r, args.dt, args.trials, args.horizon, &rng)?;
            let x0 = (start / h).round() as usize;
            let reference = if x0 < q.len() { Some(hitting_moment_orders(&q, &target, 1)?[0][x0]) } else { None };
            if let Some(v) = reference {
                let band = 3.0 * est.fine.std_error + est.bias_allowance;
                report.verdicts.push(
                    Verdict::at_most("em_mean_vs_mesh_solve", (est.fine.mean - v).abs(), band, 0.0)
                        .with_detail(format!("mesh solve: {v}; allowance includes the two-step Richardson term")),
                );
            }
            match diff_mr(spec, r, &tol) {
                Ok(m) => report.verdicts.push(Verdict::at_most(
                    "em_mean_le_m_r",
                    est.fine.mean,
                    m,
                    3.0 * est.fine.std_error + est.bias_allowance,
                )),
                Err(e) if e.is_divergence() => {
                    report.verdicts.push(Verdict::flag("em_mean_le_m_r", Status::Skipped, "M_r is infinite"))
                }
                Err(e) => return Err(e.into()),
            }
            report.verdicts.push(censoring(est.fine.censored, est.fine.trials));
            MonteCarlo { start, target: format!("[0, {r}]"), chain: None, diffusion: Some(est), reference }
        }
    };
    report.bounds = bounds;
    report.montecarlo = Some(mc);
    Ok(Outcome { report, code: 0 })
}

fn censoring(censored: usize, trials: usize) -> Verdict {
    let frac = censored as f64 / trials.max(1) as f64;
    Verdict::at_most("censoring_below_one_percent", frac, ergo_core::montecarlo::CENSOR_LIMIT, 0.0)
        .with_detail(format!("{censored} of {trials} trajectories censored"))
}
