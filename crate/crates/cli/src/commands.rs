//! The five subcommands.

use crate::output::{columns, num, trajectory_header, OutputDir, Verdict};
use anyhow::{anyhow, bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sfd_core::config::{apply_entries, parse_config, parse_entries, RunConfig};
use sfd_core::critical::{solve_samples, spectral_gap, StabilityCertificate};
use sfd_core::decomposition::{check_a1, default_eps_sequence, A1Options, A1Verdict};
use sfd_core::fold::{locate_fold, FoldOptions, FoldPoint, SlowPath};
use sfd_core::integrate::{linspace, IntegratorOptions, Method};
use sfd_core::local::{compare_reductions, gap_sweep};
use sfd_core::presets::{
    load_preset, pendulum_params, pendulum_reference_state, two_dof_params, Pendulum3, PendulumMode, PresetId,
};
use sfd_core::reduced::{build_reduced, synchronize, ReducedForm, SyncOptions, SyncVerdict};
use sfd_core::sampling::{DomainSampler, SlowSample};
use sfd_core::{Chart64, Preset64, SfdError};
use std::path::PathBuf;

/// A configuration or usage problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub set: Vec<String>,
    pub order: Option<usize>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub force: bool,
}

/// Number of phase points for the A1 check.
const A1_SAMPLES: usize = 20;
const DEFAULT_SEED: u64 = 42;
const DEFAULT_RAYS: usize = 20;

/// Fully resolved run settings.
pub struct Run {
    pub cfg: RunConfig,
    pub preset: Preset64,
    pub sampler: DomainSampler,
    pub order: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub force: bool,
}

impl Run {
    /// Resolves the configuration: defaults, then the file, then `--set`
    /// entries, then dedicated flags.
    pub fn load(o: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if !o.set.is_empty() {
            let entries = parse_entries(&o.set.join("\n")).map_err(|e| usage(format!("--set: {e}")))?;
            apply_entries(&mut cfg, entries).map_err(|e| usage(format!("--set: {e}")))?;
        }
        let order = o.order.or(cfg.options.order).unwrap_or(1);
        if order > 1 {
            return Err(usage(format!("order must be 0 or 1, got {order}")));
        }
        let eps = o.eps.or(cfg.options.eps);
        let preset = load_preset::<f64>(cfg.preset, cfg.mode.as_deref(), &cfg.overrides, eps).map_err(|e| usage(e.to_string()))?;
        let seed = o.seed.or(cfg.options.seed).unwrap_or(DEFAULT_SEED);
        Ok(Self {
            sampler: DomainSampler::with_seed(seed),
            order,
            seed,
            jobs: o.jobs.or(cfg.options.jobs),
            force: o.force || cfg.options.force.unwrap_or(false),
            cfg,
            preset,
        })
    }

    fn s(&self) -> usize {
        self.preset.system.partition().s
    }

    fn f(&self) -> usize {
        self.preset.system.partition().f()
    }

    fn method(&self, default: Method) -> anyhow::Result<Method> {
        match self.cfg.options.method.as_deref() {
            None => Ok(default),
            Some("adaptive-explicit") => Ok(Method::AdaptiveExplicit),
            Some("adaptive-implicit") => Ok(Method::AdaptiveImplicit),
            Some("fixed-reference") => Ok(Method::FixedReference),
            Some(m) => Err(usage(format!(
                "unknown method '{m}' (expected adaptive-explicit, adaptive-implicit or fixed-reference)"
            ))),
        }
    }

    fn form(&self) -> anyhow::Result<ReducedForm> {
        match self.cfg.options.form.as_deref() {
            None | Some("mass-normalized") => Ok(ReducedForm::MassNormalized),
            Some("mass-multiplied") => Ok(ReducedForm::MassMultiplied),
            Some(f) => Err(usage(format!("unknown form '{f}' (expected mass-normalized or mass-multiplied)"))),
        }
    }

    fn pendulum(&self) -> Option<Pendulum3> {
        let mode = PendulumMode::parse(&self.preset.mode)?;
        (self.preset.id == PresetId::Pendulum3).then(|| Pendulum3::new(mode, pendulum_params(&self.preset.params), self.preset.eps))
    }

    /// Initial state and time span are given in physical units.
    fn physical(&self) -> bool {
        self.cfg.options.physical_units.unwrap_or(self.preset.id == PresetId::Pendulum3)
    }

    /// Factor from configured time to system time.
    fn time_factor(&self) -> anyhow::Result<f64> {
        if !self.physical() {
            return Ok(1.0);
        }
        let p = self.pendulum().ok_or_else(|| usage("physical_units applies to the pendulum3 system only"))?;
        Ok(p.params.time_scale())
    }
}

fn a1_verdict(v: A1Verdict) -> Verdict {
    match v {
        A1Verdict::Extends => Verdict::Pass,
        A1Verdict::Diverges => Verdict::Fail,
        A1Verdict::Inconclusive => Verdict::Inconclusive,
    }
}

#[derive(Serialize)]
struct PointFailure {
    point: Vec<f64>,
    error: String,
}

#[derive(Serialize)]
struct CriticalGridReport {
    n_samples: usize,
    solved: usize,
    max_residual: f64,
    failures: Vec<PointFailure>,
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
}

/// Runs the A1, A2 and A3 checks and writes their reports. Returns the
/// spectral-gap certificate when every check passes.
fn verify_stages(run: &Run, out: &mut OutputDir) -> anyhow::Result<Option<StabilityCertificate>> {
    let sys = run.preset.system.as_ref();
    let dom = sys.domain();

    let pts = run.sampler.phase_points::<f64>(&dom, A1_SAMPLES);
    let a1_ok = match check_a1(sys, &pts, &default_eps_sequence(), A1Options::default()) {
        Ok(r) => {
            let verdict = a1_verdict(r.verdict);
            let worst = r.samples.iter().flat_map(|s| s.ratios.iter().copied()).filter(|r| r.is_finite()).fold(f64::INFINITY, f64::min);
            out.json("a1.json", &r)?;
            let detail = if worst.is_finite() {
                format!("{} samples, smallest contraction ratio {worst:.3}", r.samples.len())
            } else {
                format!("{} samples, all eps-differences below tolerance", r.samples.len())
            };
            out.stage("A1", verdict, detail);
            verdict == Verdict::Pass
        }
        Err(e) => {
            out.json("a1.json", &ErrorReport { error: e.to_string() })?;
            out.stage("A1", Verdict::Fail, e.to_string());
            false
        }
    };

    let samples = run.sampler.slow_points(&dom);
    let solved = solve_samples(sys, &samples);
    let mut report = CriticalGridReport {
        n_samples: samples.len(),
        solved: 0,
        max_residual: 0.0,
        failures: Vec::new(),
    };
    for (s, r) in samples.iter().zip(&solved) {
        match r {
            Ok(cp) => {
                report.solved += 1;
                report.max_residual = report.max_residual.max(cp.residual);
            }
            Err(e) => report.failures.push(PointFailure {
                point: s.packed(),
                error: e.to_string(),
            }),
        }
    }
    let a2_ok = report.failures.is_empty();
    out.stage(
        "A2",
        if a2_ok { Verdict::Pass } else { Verdict::Fail },
        format!("{} of {} samples solved, max residual {:.2e}", report.solved, report.n_samples, report.max_residual),
    );
    out.json("a2.json", &report)?;

    let cert = match spectral_gap(sys, &run.sampler) {
        Ok(c) => {
            out.stage("A3", Verdict::Pass, format!("Lambda = {:.6e} over {} samples", c.lambda, c.n_samples));
            out.json("a3.json", &c)?;
            Some(c)
        }
        Err(e) => {
            out.stage("A3", Verdict::Fail, e.to_string());
            out.json("a3.json", &ErrorReport { error: e.to_string() })?;
            None
        }
    };
    Ok(if a1_ok && a2_ok { cert } else { None })
}

pub fn verify(run: &Run, out: &mut OutputDir) -> anyhow::Result<bool> {
    Ok(verify_stages(run, out)?.is_some())
}

/// Verification gate for commands that build on the slow manifold. Returns
/// the spectral gap if available, `Err` when verification fails without
/// `--force`.
fn gate(run: &Run, out: &mut OutputDir, stage: &str) -> anyhow::Result<Result<Option<f64>, ()>> {
    let cert = verify_stages(run, out)?;
    if cert.is_none() && !run.force {
        out.stage(stage, Verdict::Skipped, "verification failed; rerun with --force to proceed");
        return Ok(Err(()));
    }
    if cert.is_none() {
        // forced: use the gap if the stability check alone succeeded
        let gap = spectral_gap(run.preset.system.as_ref(), &run.sampler).ok().map(|c| c.lambda);
        return Ok(Ok(gap));
    }
    Ok(Ok(cert.map(|c| c.lambda)))
}

#[derive(Serialize)]
struct ReducedMetadata {
    system: String,
    mode: String,
    eps: f64,
    order: usize,
    form: ReducedForm,
    lambda: Option<f64>,
    n_samples: usize,
    seed: u64,
}

pub fn reduce(run: &Run, out: &mut OutputDir) -> anyhow::Result<bool> {
    let Ok(lambda) = gate(run, out, "reduce")? else {
        return Ok(false);
    };
    let (s, f) = (run.s(), run.f());
    let form = run.form()?;
    let chart = Chart64::new(run.preset.system.clone(), run.preset.eps, run.order)?;
    let reduced = build_reduced(chart.clone(), run.order, form)?;
    let samples = run.sampler.grid(&run.preset.system.domain());
    let rows: Vec<(Vec<f64>, Vec<f64>)> = samples
        .par_iter()
        .map(|p| -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
            let (x, xd) = (p.x::<f64>(), p.xd::<f64>());
            let v = chart.values(&x, &xd, p.t).with_context(|| format!("chart at {:?}", p.packed()))?;
            let mut base = vec![p.t];
            base.extend(x.iter().chain(xd.iter()));
            let mut c = base.clone();
            c.extend(v.g0.iter().chain(v.h0.iter()));
            if let (Some(g1), Some(h1)) = (&v.g1, &v.h1) {
                c.extend(g1.iter().chain(h1.iter()));
            }
            let mut r = base;
            r.extend(reduced.first_order(p.t, &sfd_core::linalg::concat(&[&x, &xd]))?.rows(s, s).iter());
            Ok((c, r))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut header = trajectory_header(s, None);
    header.extend(columns("g0_", f));
    header.extend(columns("h0_", f));
    if run.order >= 1 {
        header.extend(columns("g1_", f));
        header.extend(columns("h1_", f));
    }
    let (chart_rows, rhs_rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    out.table("chart.csv", &header, &chart_rows)?;
    let mut rhs_header = trajectory_header(s, None);
    rhs_header.extend(columns("ddx", s));
    out.table("rhs.csv", &rhs_header, &rhs_rows)?;
    out.json(
        "reduced.json",
        &ReducedMetadata {
            system: run.preset.id.to_string(),
            mode: run.preset.mode.clone(),
            eps: run.preset.eps,
            order: run.order,
            form,
            lambda,
            n_samples: samples.len(),
            seed: run.seed,
        },
    )?;
    out.stage("reduce", Verdict::Pass, format!("order {} model, {} chart samples", run.order, samples.len()));
    Ok(true)
}

/// Default initial state: lifted onto the chart at a point inside the
/// domain, with the fast velocities pushed off the manifold.
fn initial_state(run: &Run, chart: &Chart64) -> anyhow::Result<nalgebra::DVector<f64>> {
    let (s, f) = (run.s(), run.f());
    if let Some(z) = &run.cfg.options.initial_state {
        if z.len() != 2 * (s + f) {
            return Err(usage(format!("initial_state needs {} entries, got {}", 2 * (s + f), z.len())));
        }
        if run.physical() {
            let p = run.pendulum().ok_or_else(|| usage("physical_units applies to the pendulum3 system only"))?;
            return Ok(nalgebra::DVector::from_vec(p.full_state(z)));
        }
        return Ok(nalgebra::DVector::from_column_slice(z));
    }
    if let Some(p) = run.pendulum() {
        let mode = PendulumMode::parse(&run.preset.mode).expect("pendulum mode");
        return Ok(nalgebra::DVector::from_vec(p.full_state(&pendulum_reference_state(mode))));
    }
    let dom = run.preset.system.domain();
    let at = |r: &[(f64, f64)], frac: f64| {
        nalgebra::DVector::from_iterator(r.len(), r.iter().map(|&(lo, hi)| 0.5 * (lo + hi) + frac * 0.5 * (hi - lo)))
    };
    let t0 = run.cfg.options.t_start.unwrap_or(0.0);
    let mut z = chart.lift_state(&at(&dom.x, 0.25), &at(&dom.xd, 0.15), t0)?;
    for i in 0..f {
        let (lo, hi) = dom.yd[i];
        z[2 * s + f + i] += 0.25 * (hi - lo);
    }
    Ok(z)
}

pub fn simulate(run: &Run, out: &mut OutputDir) -> anyhow::Result<bool> {
    let Ok(lambda) = gate(run, out, "simulate")? else {
        return Ok(false);
    };
    let lambda = lambda.ok_or_else(|| anyhow!("no spectral gap available for the synchronization check"))?;
    let (s, f) = (run.s(), run.f());
    let sys = run.preset.system.clone();
    let chart = Chart64::new(sys.clone(), run.preset.eps, run.order)?;
    let reduced = build_reduced(chart.clone(), run.order, run.form()?)?;
    let z0 = initial_state(run, &chart)?;
    let scale = run.time_factor()?;
    let o = &run.cfg.options;
    let t_hi = sys.domain().t.1;
    let default_end = match run.preset.id {
        PresetId::Pendulum3 => 25.0,
        _ if t_hi > 0.0 => t_hi,
        _ => sys.time_dependence().characteristic_period(),
    };
    let t_span = (o.t_start.unwrap_or(0.0) * scale, o.t_end.unwrap_or(default_end) * scale);
    if !(t_span.1 > t_span.0) {
        return Err(usage("t_end must exceed t_start"));
    }
    let mut opts = SyncOptions::default();
    opts.snap_tol = o.snap_tol.unwrap_or(opts.snap_tol);
    opts.full.method = run.method(Method::AdaptiveImplicit)?;
    opts.full.rtol = o.rtol.unwrap_or(opts.full.rtol);
    opts.full.atol = o.atol.unwrap_or(opts.full.atol);
    if let Some(n) = o.output_points {
        opts.dt = Some((t_span.1 - t_span.0) / n.max(1) as f64);
    }
    let sync = match synchronize(&reduced, lambda, &z0, t_span, &opts) {
        Ok(r) => r,
        Err(e @ SfdError::NoApproach { .. }) => {
            out.json("sync.json", &ErrorReport { error: e.to_string() })?;
            out.stage("sync", Verdict::Fail, e.to_string());
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };

    let row = |t: f64, z: &nalgebra::DVector<f64>| std::iter::once(t).chain(z.iter().copied()).collect::<Vec<f64>>();
    let full_rows: Vec<Vec<f64>> = sync.full.times.iter().zip(&sync.full.states).map(|(&t, z)| row(t, z)).collect();
    out.table("full.csv", &trajectory_header(s, Some(f)), &full_rows)?;
    let red_rows: Vec<Vec<f64>> = sync.reduced.times.iter().zip(&sync.reduced.states).map(|(&t, z)| row(t, z)).collect();
    out.table("reduced.csv", &trajectory_header(s, None), &red_rows)?;
    let r = &sync.report;
    let dist_rows: Vec<Vec<f64>> = r.full_times.iter().zip(&r.distances).map(|(&t, &d)| vec![t, d]).collect();
    out.table("distance.csv", &["t".into(), "distance".into()], &dist_rows)?;
    let err_rows: Vec<Vec<f64>> = r.times.iter().zip(&r.errors).map(|(&t, &e)| vec![t, e]).collect();
    out.table("error.csv", &["t".into(), "error".into()], &err_rows)?;
    out.json("sync.json", r)?;
    let verdict = match r.verdict {
        SyncVerdict::Pass => Verdict::Pass,
        SyncVerdict::Fail => Verdict::Fail,
        SyncVerdict::Inconclusive => Verdict::Inconclusive,
    };
    let rate = r.rate.map_or("none".to_string(), |v| format!("{v:.4e}"));
    out.stage("sync", verdict, format!("snap at t = {:.4}, rate {rate} vs bound {:.4e}", r.t_snap, r.bound));
    Ok(verdict != Verdict::Fail)
}

#[derive(Serialize)]
struct RayOutcome {
    start: SlowSample,
    end: SlowSample,
    outcome: &'static str,
    detail: Option<String>,
    fold: Option<FoldPoint>,
}

#[derive(Serialize)]
struct FoldReport {
    rays: Vec<RayOutcome>,
    boundary: Vec<FoldPoint>,
}

/// Rays from the domain centre (random slow velocity and time) to four
/// half-widths out in a random direction of the slow positions.
fn make_rays(run: &Run, n: usize) -> Vec<SlowPath> {
    let dom = run.preset.system.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let radius = 4.0 * dom.x.iter().map(|&(lo, hi)| 0.5 * (hi - lo)).fold(0.0, f64::max);
    (0..n)
        .map(|_| {
            let centre: Vec<f64> = dom.x.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
            let mut dir: Vec<f64> = centre.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|v| *v /= norm);
            let t0 = draw(&mut rng, dom.t);
            let t1 = if dom.t.1 > dom.t.0 { t0 + rng.gen_range(-1.0..1.0) } else { t0 };
            let start = SlowSample {
                x: centre.clone(),
                xd: dom.xd.iter().map(|&r| draw(&mut rng, r)).collect(),
                t: t0,
            };
            let end = SlowSample {
                x: centre.iter().zip(&dir).map(|(c, d)| c + radius * d).collect(),
                xd: dom.xd.iter().map(|&r| draw(&mut rng, r)).collect(),
                t: t1,
            };
            SlowPath::new(start, end)
        })
        .collect()
}

pub fn fold(run: &Run, out: &mut OutputDir) -> anyhow::Result<bool> {
    let sys = run.preset.system.as_ref();
    let rays = make_rays(run, run.cfg.options.rays.unwrap_or(DEFAULT_RAYS));
    let results: Vec<sfd_core::Result<FoldPoint>> = rays
        .par_iter()
        .map(|path| {
            let (x, xd, t) = path.at::<f64>(0.0);
            locate_fold(sys, path, &sys.branch_guess(&x, &xd, t), FoldOptions::default())
        })
        .collect();
    let mut report = FoldReport {
        rays: Vec::new(),
        boundary: Vec::new(),
    };
    let mut hard = 0;
    for (path, r) in rays.into_iter().zip(results) {
        let (outcome, detail, fold) = match r {
            Ok(fp) => ("fold", None, Some(fp)),
            Err(SfdError::NoSignChange) => ("no-sign-change", None, None),
            Err(e @ SfdError::DegenerateFold { .. }) => ("degenerate", Some(e.to_string()), None),
            Err(e) => {
                hard += 1;
                ("error", Some(e.to_string()), None)
            }
        };
        if let Some(fp) = &fold {
            report.boundary.push(fp.clone());
        }
        report.rays.push(RayOutcome {
            start: path.start,
            end: path.end,
            outcome,
            detail,
            fold,
        });
    }
    let (s, f) = (run.s(), run.f());
    let mut header = trajectory_header(s, None);
    header.extend(columns("eta", f));
    header.extend(["det", "nondegeneracy", "plus_stable", "minus_stable"].map(String::from));
    let rows: Vec<Vec<String>> = report
        .boundary
        .iter()
        .map(|fp| {
            let mut r: Vec<String> = std::iter::once(fp.t).chain(fp.x.iter().copied()).chain(fp.xd.iter().copied()).chain(fp.eta.iter().copied()).map(num).collect();
            r.push(num(fp.det));
            r.push(num(fp.nondegeneracy));
            let b = fp.branches.as_ref();
            r.push(b.map_or("", |b| if b.plus { "1" } else { "0" }).to_string());
            r.push(b.map_or("", |b| if b.minus { "1" } else { "0" }).to_string());
            r
        })
        .collect();
    out.csv("boundary.csv", &header, &rows)?;
    out.json("fold.json", &report)?;
    let n = report.rays.len();
    let detail = format!("{} folds on {n} rays, {hard} errors", report.boundary.len());
    out.stage("fold", if hard == 0 { Verdict::Pass } else { Verdict::Fail }, detail);
    Ok(hard == 0)
}

pub fn compare_local(run: &Run, out: &mut OutputDir) -> anyhow::Result<bool> {
    if run.preset.id != PresetId::TwoDofSsm {
        bail!(UsageError(format!("compare-local requires system = \"twodof-ssm\", got {}", run.preset.id)));
    }
    let p = two_dof_params(&run.preset.params);
    let o = &run.cfg.options;
    let (x0, xd0) = match o.initial_state.as_deref() {
        None => (0.1, 0.0),
        Some([x, xd, ..]) => (*x, *xd),
        Some(_) => return Err(usage("initial_state needs at least (x, xd)")),
    };
    let (t0, t1) = (o.t_start.unwrap_or(0.0), o.t_end.unwrap_or(20.0));
    if !(t1 > t0) {
        return Err(usage("t_end must exceed t_start"));
    }
    let t = linspace(t0, t1, o.output_points.unwrap_or(400));
    let mut opts = IntegratorOptions::default().with_method(run.method(Method::AdaptiveExplicit)?);
    opts.rtol = o.rtol.unwrap_or(1e-10);
    opts.atol = o.atol.unwrap_or(1e-12);
    let mut report = match compare_reductions(p, x0, xd0, &t, &opts) {
        Ok(r) => r,
        Err(e @ SfdError::NearResonance { .. }) => {
            out.json("compare.json", &ErrorReport { error: e.to_string() })?;
            out.stage("compare-local", Verdict::Fail, e.to_string());
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let sweep = o.k2_sweep.clone().unwrap_or_else(|| linspace(8.0 * p.k1, 4.4 * p.k1, 11));
    report.sweep = gap_sweep(p, &sweep);
    let rows: Vec<Vec<f64>> = report.times.iter().zip(&report.states).map(|(&t, r)| std::iter::once(t).chain(r.iter().copied()).collect()).collect();
    let header = ["t", "x_sc", "dx_sc", "x_md", "dx_md", "x_ssm", "dx_ssm"].map(String::from);
    out.table("compare.csv", &header, &rows)?;
    let sweep_rows: Vec<Vec<f64>> = report.sweep.iter().map(|s| vec![s.k2, s.gap]).collect();
    out.table("sweep.csv", &["k2".into(), "gap".into()], &sweep_rows)?;
    out.json("compare.json", &report)?;
    out.stage(
        "compare-local",
        Verdict::Pass,
        format!("cubic coefficients sc {:.6}, md {:.6}, ssm {:.6}; gap {:.4e}", report.coeffs.sc, report.coeffs.md, report.coeffs.ssm, report.gap),
    );
    Ok(true)
}
