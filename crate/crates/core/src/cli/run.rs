//! Experiment runners. Each produces a [`Report`]: named CSV files plus
//! pass/fail verdicts; nothing touches the filesystem until
//! [`write_report`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, Interval, ModelConfig};
use super::format::{fmt_e, fmt_f, fmt_g, Table};
use crate::diagnostics::{bore_rates, error_norms, error_norms_2d, invariants, leading_undulation, ErrorReport};
use crate::grid::{make_grid, sample, Field1D, Field2D, Grid1D, Grid2D};
use crate::models::{
    analytic_bore_rates, analytic_invariants_solitary, analytic_invariants_waves, bbmb_sech, ew_bore, ew_equation,
    ew_solitary, linear_sobolev_2d, linear_sobolev_sine, multi_soliton_ic, BoreParams, EquationSpec, EquationSpec2D,
    SolitaryWaveParams, Wave,
};
use crate::operators::{build_first_derivative, Closure};
use crate::stability::{decay_envelope, fully_discrete_amplification, frozen_stable_tau, max_stable_tau,
    semi_discrete_amplification, StableTau, SymbolParams};
use crate::stepper::{run, run_2d, run_with, Sample, Status, TauRule, TimeConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("run diverged: {0}")]
    Diverged(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for numerical trouble, 2 for anything wrong with the request.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) | CliError::Diverged(_) => 1,
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub check: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    /// `(file name, CSV text)` in output order.
    pub files: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    fn file(&mut self, name: &str, table: &Table) {
        self.files.push((name.to_string(), table.to_csv()));
    }

    fn check(&mut self, check: String, value: f64, target: String, pass: bool) {
        self.verdicts.push(Verdict {
            check,
            value,
            target,
            pass,
        });
    }
}

/// Thread pool for sweep members, capped by `COMPACT6_THREADS` when set.
pub fn sweep_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("COMPACT6_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Usage(format!("COMPACT6_THREADS must be an integer >= 1, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

pub fn build_model_1d(model: &ModelConfig) -> crate::Result<EquationSpec> {
    match model {
        ModelConfig::LinearSobolev { alpha, gamma, delta } => linear_sobolev_sine(*alpha, *gamma, *delta),
        ModelConfig::EwSolitary { c, x0, delta } => ew_solitary(&SolitaryWaveParams::new(*c, *x0, *delta)?),
        ModelConfig::EwMultiSoliton { delta, waves } => {
            let waves: Vec<Wave> = waves.iter().map(|w| Wave { c: w.c, k: w.k, x: w.x }).collect();
            let mut spec = ew_equation(*delta)?;
            spec.name = "ew_multi_soliton".into();
            spec.initial = multi_soliton_ic(&waves);
            Ok(spec)
        }
        ModelConfig::EwBore { u0, d, xc, delta } => ew_bore(&BoreParams::new(*u0, *d, *xc)?, *delta),
        ModelConfig::Bbmb => Ok(bbmb_sech()),
        ModelConfig::LinearSobolev2D { .. } => Err(crate::Error::InvalidParameter(
            "linear_sobolev_2d is a 2D model".into(),
        )),
    }
}

pub fn build_model_2d(model: &ModelConfig) -> crate::Result<EquationSpec2D> {
    match model {
        ModelConfig::LinearSobolev2D {
            alpha_x,
            alpha_y,
            gamma,
            delta,
        } => linear_sobolev_2d(*alpha_x, *alpha_y, *gamma, *delta),
        other => Err(crate::Error::InvalidParameter(format!("{} is a 1D model", other.kind()))),
    }
}

fn grid_of(iv: &Interval, n: usize) -> crate::Result<Grid1D> {
    make_grid(iv.a, iv.b, n)
}

fn time_config(cfg: &ExperimentConfig) -> TimeConfig {
    TimeConfig::new(cfg.t_final, cfg.tau).with_samples(cfg.sample_times.clone())
}

fn exact_field(spec: &EquationSpec, grid: &Grid1D, t: f64) -> crate::Result<Field1D> {
    sample(|x| spec.exact_at(x, t).unwrap_or(f64::NAN), grid)
}

/// Dispatches on the experiment kind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    use ExperimentKind::*;
    match cfg.experiment {
        ConvergenceSpace | Bbmb => run_convergence_space(cfg),
        ConvergenceTime => run_convergence_time(cfg),
        StabilitySweep => run_stability_sweep(cfg),
        DecayCheck => run_decay_check(cfg),
        Solitary | Interaction => run_invariants(cfg),
        Bore => run_bore(cfg),
        Custom => run_custom(cfg),
    }
}

// ---------------------------------------------------------------------------
// Convergence

fn convergence_table(first: &str, labels: &[String], reports: &[ErrorReport]) -> Table {
    let mut t = Table::new(&[first, "Linf", "rate", "L1", "rate", "L2", "rate"]);
    let rate = |r: Option<f64>| r.map(|v| fmt_f(v, 4)).unwrap_or_default();
    for (label, r) in labels.iter().zip(reports) {
        t.push(vec![
            label.clone(),
            fmt_e(r.linf, 4),
            rate(r.rate_linf),
            fmt_e(r.l1, 4),
            rate(r.rate_l1),
            fmt_e(r.l2, 4),
            rate(r.rate_l2),
        ]);
    }
    t
}

fn with_rates(mut reports: Vec<ErrorReport>, ratios: &[f64]) -> Vec<ErrorReport> {
    for k in 1..reports.len() {
        let coarser = reports[k - 1];
        reports[k] = reports[k].with_rates(&coarser, ratios[k - 1]);
    }
    reports
}

fn convergence_verdicts(report: &mut Report, cfg: &ExperimentConfig, labels: &[String], errs: &[ErrorReport]) {
    let e = &cfg.expect;
    if let Some(target) = e.rate {
        let tol = e.rate_tol.unwrap_or(0.15);
        for (label, r) in labels.iter().zip(errs).skip(1) {
            for (norm, rate) in [("Linf", r.rate_linf), ("L1", r.rate_l1), ("L2", r.rate_l2)] {
                let v = rate.unwrap_or(f64::NAN);
                report.check(
                    format!("rate {norm} at {label}"),
                    v,
                    format!("{target} +/- {tol}"),
                    (v - target).abs() <= tol,
                );
            }
        }
    }
    if let Some(reference) = &e.reference {
        let factor = e.factor.unwrap_or(2.0);
        for ((label, r), want) in labels.iter().zip(errs).zip(reference) {
            for (k, (norm, got)) in [("Linf", r.linf), ("L1", r.l1), ("L2", r.l2)].into_iter().enumerate() {
                let ratio = got / want[k];
                report.check(
                    format!("{norm} at {label}"),
                    got,
                    format!("within {factor}x of {}", fmt_e(want[k], 4)),
                    ratio <= factor && ratio >= 1.0 / factor,
                );
            }
        }
    }
}

fn error_at(cfg: &ExperimentConfig, n: usize, tau: TauRule) -> Result<ErrorReport, CliError> {
    let tcfg = TimeConfig::new(cfg.t_final, tau);
    let diverged = |e: crate::Error| match e {
        crate::Error::Diverged { step, t } => {
            CliError::Diverged(format!("N = {n} diverged at step {step} (t = {t})"))
        }
        other => CliError::Numerical(other),
    };
    if cfg.model.is_2d() {
        let spec = build_model_2d(&cfg.model)?;
        let yiv = cfg.domain.y.unwrap_or(cfg.domain.x);
        let grid = Grid2D::new(grid_of(&cfg.domain.x, n)?, grid_of(&yiv, n)?);
        let traj = run_2d(&spec, &grid, &tcfg).map_err(diverged)?;
        let exact = spec.exact.clone().expect("2D models carry an exact solution");
        let ex = Field2D::sample(|x, y| exact(x, y, traj.state.t), &grid)?;
        Ok(error_norms_2d(&traj.state.u, &ex)?)
    } else {
        let spec = build_model_1d(&cfg.model)?;
        let grid = grid_of(&cfg.domain.x, n)?;
        let traj = run(&spec, &grid, &tcfg).map_err(diverged)?;
        let ex = exact_field(&spec, &grid, traj.state.t)?;
        Ok(error_norms(&traj.state.u, &ex, grid.h())?)
    }
}

pub fn run_convergence_space(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let ladder = if cfg.ladder.is_empty() {
        vec![cfg.domain.x.n]
    } else {
        cfg.ladder.clone()
    };
    let pool = sweep_pool()?;
    let errs: Vec<ErrorReport> = pool.install(|| {
        ladder
            .par_iter()
            .map(|&n| error_at(cfg, n, cfg.tau))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let ratios: Vec<f64> = ladder.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let errs = with_rates(errs, &ratios);
    let labels: Vec<String> = ladder.iter().map(|n| n.to_string()).collect();
    let mut report = Report::default();
    let table = convergence_table("N", &labels, &errs);
    report.summary.push(format!("{} convergence ({}):", cfg.experiment.name(), cfg.model.kind()));
    report.summary.extend(table.to_csv().lines().map(str::to_string));
    report.file("convergence.csv", &table);
    convergence_verdicts(&mut report, cfg, &labels, &errs);
    Ok(report)
}

pub fn run_convergence_time(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let n = cfg.domain.x.n;
    let pool = sweep_pool()?;
    let errs: Vec<ErrorReport> = pool.install(|| {
        cfg.taus
            .par_iter()
            .map(|&tau| error_at(cfg, n, TauRule::Fixed(tau)))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let ratios: Vec<f64> = cfg.taus.windows(2).map(|w| w[0] / w[1]).collect();
    let errs = with_rates(errs, &ratios);
    let labels: Vec<String> = cfg.taus.iter().map(|&t| fmt_e(t, 0)).collect();
    let mut report = Report::default();
    let table = convergence_table("tau", &labels, &errs);
    report.summary.push(format!("temporal convergence at N = {n}:"));
    report.summary.extend(table.to_csv().lines().map(str::to_string));
    report.file("convergence.csv", &table);
    convergence_verdicts(&mut report, cfg, &labels, &errs);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Stability

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMember {
    pub tau: f64,
    pub final_linf: f64,
    pub diverged: bool,
    pub t_reached: f64,
}

/// One fixed-step run that stops once `||u||_inf` exceeds `threshold`.
pub fn stability_run(
    spec: &EquationSpec,
    grid: &Grid1D,
    t_final: f64,
    tau: f64,
    threshold: f64,
) -> crate::Result<SweepMember> {
    let mut blew_up = false;
    let traj = run_with(spec, grid, &TimeConfig::new(t_final, TauRule::Fixed(tau)), |st| {
        blew_up = !(st.u.max_abs() <= threshold);
        !blew_up
    })?;
    Ok(SweepMember {
        tau,
        final_linf: traj.state.u.max_abs(),
        diverged: blew_up || traj.state.status == Status::Diverged,
        t_reached: traj.state.t,
    })
}

fn stable_tau_for(cfg: &ExperimentConfig, spec: &EquationSpec, grid: &Grid1D) -> crate::Result<StableTau> {
    match cfg.model {
        ModelConfig::LinearSobolev { alpha, gamma, delta } => {
            Ok(max_stable_tau(alpha, gamma, delta, grid.h(), cfg.growth_constant))
        }
        _ => {
            let u0 = sample(|x| (spec.initial)(x), grid)?;
            let op1 = build_first_derivative(grid, Closure::Dirichlet)?;
            frozen_stable_tau(&u0, spec, &op1, cfg.growth_constant)
        }
    }
}

fn stable_tau_table(s: &StableTau) -> Table {
    let mut t = Table::new(&["tau_max", "theta", "unconditionally_unstable"]);
    t.push(vec![
        fmt_g(s.tau, 17),
        s.theta.map(|v| fmt_g(v, 17)).unwrap_or_default(),
        s.unconditionally_unstable.to_string(),
    ]);
    t
}

pub fn run_stability_sweep(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let spec = build_model_1d(&cfg.model)?;
    let grid = grid_of(&cfg.domain.x, cfg.domain.x.n)?;
    let pool = sweep_pool()?;
    let members: Vec<SweepMember> = pool.install(|| {
        cfg.taus
            .par_iter()
            .map(|&tau| stability_run(&spec, &grid, cfg.t_final, tau, cfg.blowup_threshold))
            .collect::<crate::Result<Vec<_>>>()
    })?;
    let limit = stable_tau_for(cfg, &spec, &grid)?;

    let mut report = Report::default();
    let mut table = Table::new(&["tau", "final_linf", "status"]);
    for m in &members {
        table.push(vec![
            fmt_g(m.tau, 17),
            fmt_e(m.final_linf, 4),
            if m.diverged { "diverged" } else { "bounded" }.to_string(),
        ]);
    }
    report.summary.push(format!(
        "max stable tau (growth constant {}): {}",
        cfg.growth_constant,
        fmt_g(limit.tau, 10)
    ));
    report.summary.extend(table.to_csv().lines().map(str::to_string));
    report.file("stability.csv", &table);
    report.file("stable_tau.csv", &stable_tau_table(&limit));

    let find = |tau: f64| members.iter().find(|m| m.tau == tau);
    for &tau in &cfg.expect.bounded {
        match find(tau) {
            Some(m) => {
                let cap = cfg.expect.bounded_max.unwrap_or(cfg.blowup_threshold);
                report.check(
                    format!("tau = {tau} bounded"),
                    m.final_linf,
                    format!("not diverged, final norm <= {cap:e}"),
                    !m.diverged && m.final_linf <= cap,
                );
            }
            None => report.check(format!("tau = {tau} bounded"), f64::NAN, "tau in sweep".into(), false),
        }
    }
    for &tau in &cfg.expect.diverged {
        match find(tau) {
            Some(m) => report.check(
                format!("tau = {tau} diverged"),
                m.final_linf,
                format!("norm above {:e} before T", cfg.blowup_threshold),
                m.diverged,
            ),
            None => report.check(format!("tau = {tau} diverged"), f64::NAN, "tau in sweep".into(), false),
        }
    }
    Ok(report)
}

pub fn run_decay_check(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let ModelConfig::LinearSobolev { alpha, gamma, delta } = cfg.model else {
        return Err(CliError::Usage("decay_check needs the linear_sobolev model".into()));
    };
    let spec = build_model_1d(&cfg.model)?;
    let grid = grid_of(&cfg.domain.x, cfg.domain.x.n)?;
    let times = if cfg.sample_times.is_empty() {
        (1..=100).map(|k| cfg.t_final * k as f64 / 100.0).collect()
    } else {
        cfg.sample_times.clone()
    };
    let traj = run(&spec, &grid, &TimeConfig::new(cfg.t_final, cfg.tau).with_samples(times))?;
    let u0 = sample(|x| (spec.initial)(x), &grid)?.max_abs();
    // The initial profile sin(x) is the phase theta = h on this grid.
    let p = SymbolParams::new(alpha, gamma, delta, grid.h()).at(grid.h());
    let mut table = Table::new(&["t", "linf", "envelope", "ok"]);
    let mut worst = f64::NEG_INFINITY;
    for s in &traj.samples {
        let norm = s.field.max_abs();
        let env = decay_envelope(&p, s.t, u0);
        worst = worst.max(norm / env);
        table.push(vec![fmt_g(s.t, 17), fmt_e(norm, 8), fmt_e(env, 8), (norm <= env).to_string()]);
    }
    let mut report = Report::default();
    report.summary.push(format!(
        "decay check: Re C(h) = {}, worst norm/envelope = {}",
        fmt_e(semi_discrete_amplification(&p).re, 6),
        fmt_f(worst, 8)
    ));
    report.file("decay.csv", &table);
    report.check(
        "norm below decay envelope at every sample".into(),
        worst,
        "ratio <= 1".into(),
        worst <= 1.0,
    );
    Ok(report)
}

/// Amplification factors over `theta in [0, pi]` and the stable step bound,
/// without time stepping.
pub fn run_analyze(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (alpha, gamma, delta) = match cfg.model {
        ModelConfig::LinearSobolev { alpha, gamma, delta } => (alpha, gamma, delta),
        ref other => {
            return Err(CliError::Usage(format!(
                "analyze needs the linear_sobolev model, got {}",
                other.kind()
            )))
        }
    };
    let grid = grid_of(&cfg.domain.x, cfg.domain.x.n)?;
    let h = grid.h();
    let tau = cfg.tau.resolve(h);
    let base = SymbolParams::new(alpha, gamma, delta, h).with_tau(tau);
    let mut table = Table::new(&["theta", "re_c", "im_c", "abs_l"]);
    for k in 0..=180 {
        let p = base.at(std::f64::consts::PI * k as f64 / 180.0);
        let c = semi_discrete_amplification(&p);
        let l = fully_discrete_amplification(&p);
        table.push(vec![fmt_g(p.theta, 17), fmt_e(c.re, 8), fmt_e(c.im, 8), fmt_f(l.norm(), 12)]);
    }
    let limit = max_stable_tau(alpha, gamma, delta, h, cfg.growth_constant);
    let mut report = Report::default();
    report.summary.push(format!(
        "h = {}, tau = {}, max stable tau = {}",
        fmt_g(h, 10),
        fmt_g(tau, 10),
        fmt_g(limit.tau, 10)
    ));
    report.file("amplification.csv", &table);
    report.file("stable_tau.csv", &stable_tau_table(&limit));
    Ok(report)
}

// ---------------------------------------------------------------------------
// Invariants and series

fn default_samples(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.sample_times.is_empty() {
        vec![0.0, cfg.t_final]
    } else {
        cfg.sample_times.clone()
    }
}

fn series_1d(field: &Field1D) -> Table {
    let mut t = Table::new(&["x", "u"]);
    for (x, u) in field.grid.nodes().zip(&field.values) {
        t.push(vec![fmt_g(x, 17), fmt_g(*u, 17)]);
    }
    t
}

fn series_2d(field: &Field2D) -> Table {
    let mut t = Table::new(&["x", "y", "u"]);
    let g = field.grid;
    for i in 0..=g.gx.n() {
        for j in 0..=g.gy.n() {
            t.push(vec![fmt_g(g.gx.node(i), 17), fmt_g(g.gy.node(j), 17), fmt_g(field.get(i, j), 17)]);
        }
    }
    t
}

/// One `x,u` file per sample plus an index of requested and actual times.
pub fn emit_series<F>(report: &mut Report, samples: &[Sample<F>], render: impl Fn(&F) -> Table) {
    let mut index = Table::new(&["file", "requested", "t"]);
    for (k, s) in samples.iter().enumerate() {
        let name = format!("series_{k:03}.csv");
        report.file(&name, &render(&s.field));
        index.push(vec![name, fmt_g(s.requested, 17), fmt_g(s.t, 17)]);
    }
    report.file("series_index.csv", &index);
}

fn run_invariants(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let spec = build_model_1d(&cfg.model)?;
    let grid = grid_of(&cfg.domain.x, cfg.domain.x.n)?;
    let (exact, delta) = match &cfg.model {
        ModelConfig::EwSolitary { c, x0, delta } => {
            (analytic_invariants_solitary(&SolitaryWaveParams::new(*c, *x0, *delta)?), *delta)
        }
        ModelConfig::EwMultiSoliton { delta, waves } => {
            let waves: Vec<Wave> = waves.iter().map(|w| Wave { c: w.c, k: w.k, x: w.x }).collect();
            (analytic_invariants_waves(&waves, *delta), *delta)
        }
        other => return Err(CliError::Usage(format!("no analytic invariants for {}", other.kind()))),
    };
    let times = default_samples(cfg);
    let traj = run(&spec, &grid, &TimeConfig::new(cfg.t_final, cfg.tau).with_samples(times)).map_err(|e| match e {
        crate::Error::Diverged { step, t } => CliError::Diverged(format!("step {step}, t = {t}")),
        other => other.into(),
    })?;
    let op1 = build_first_derivative(&grid, Closure::Dirichlet)?;
    let mut table = Table::new(&["t", "I1", "pct1", "I2", "pct2", "I3", "pct3"]);
    let mut report = Report::default();
    for s in &traj.samples {
        let inv = invariants(&s.field, delta, &op1, s.t)?.with_reference(exact);
        let pct = inv.pct_err.expect("reference attached");
        table.push(vec![
            fmt_g(s.t, 17),
            fmt_e(inv.values[0], 8),
            fmt_e(pct[0], 4),
            fmt_e(inv.values[1], 8),
            fmt_e(pct[1], 4),
            fmt_e(inv.values[2], 8),
            fmt_e(pct[2], 4),
        ]);
    }
    report.summary.push(format!(
        "analytic invariants: {} {} {}",
        fmt_e(exact[0], 6),
        fmt_e(exact[1], 6),
        fmt_e(exact[2], 6)
    ));
    report.summary.extend(table.to_csv().lines().map(str::to_string));
    report.file("invariants.csv", &table);
    if spec.exact.is_some() {
        let ex = exact_field(&spec, &grid, traj.state.t)?;
        let e = error_norms(&traj.state.u, &ex, grid.h())?;
        let mut t = Table::new(&["t", "Linf", "L1", "L2"]);
        t.push(vec![fmt_g(traj.state.t, 17), fmt_e(e.linf, 4), fmt_e(e.l1, 4), fmt_e(e.l2, 4)]);
        report.file("errors.csv", &t);
    }
    if let Some(max) = cfg.expect.max_pct {
        let last = invariants(&traj.state.u, delta, &op1, traj.state.t)?
            .with_reference(exact)
            .pct_err
            .expect("reference attached");
        for k in 0..3 {
            report.check(
                format!("I{} percentage error at t = {}", k + 1, fmt_g(traj.state.t, 6)),
                last[k],
                format!("< {:e}%", max[k]),
                last[k] < max[k],
            );
        }
    }
    emit_series(&mut report, &traj.samples, series_1d);
    Ok(report)
}

fn run_bore(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let ModelConfig::EwBore { u0, delta, .. } = cfg.model else {
        return Err(CliError::Usage("bore needs the ew_bore model".into()));
    };
    let spec = build_model_1d(&cfg.model)?;
    let grid = grid_of(&cfg.domain.x, cfg.domain.x.n)?;
    let times = default_samples(cfg);
    let traj = run(&spec, &grid, &TimeConfig::new(cfg.t_final, cfg.tau).with_samples(times)).map_err(|e| match e {
        crate::Error::Diverged { step, t } => CliError::Diverged(format!("step {step}, t = {t}")),
        other => other.into(),
    })?;
    let op1 = build_first_derivative(&grid, Closure::Dirichlet)?;
    let mut table = Table::new(&["t", "I1", "I2", "I3", "x_lead", "amp"]);
    let mut fit = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let inv = invariants(&s.field, delta, &op1, s.t)?;
        let (x, amp) = leading_undulation(&s.field);
        fit.push((s.t, inv.values));
        table.push(vec![
            fmt_g(s.t, 17),
            fmt_f(inv.values[0], 6),
            fmt_f(inv.values[1], 6),
            fmt_f(inv.values[2], 6),
            fmt_f(x, 2),
            fmt_f(amp, 6),
        ]);
    }
    let rates = bore_rates(&fit)?;
    let exact = analytic_bore_rates(u0);
    let mut rt = Table::new(&["M1", "M2", "M3", "M1_exact", "M2_exact", "M3_exact"]);
    rt.push(rates.iter().chain(&exact).map(|v| fmt_e(*v, 4)).collect());

    let mut report = Report::default();
    report.summary.extend(table.to_csv().lines().map(str::to_string));
    report.summary.push(format!(
        "fitted rates {} {} {} (analytic {} {} {})",
        fmt_e(rates[0], 4),
        fmt_e(rates[1], 4),
        fmt_e(rates[2], 4),
        fmt_e(exact[0], 4),
        fmt_e(exact[1], 4),
        fmt_e(exact[2], 4)
    ));
    report.file("bore.csv", &table);
    report.file("bore_rates.csv", &rt);
    let e = &cfg.expect;
    if let Some(tol) = e.rates_rel_tol {
        for k in 0..3 {
            let rel = (rates[k] - exact[k]).abs() / exact[k];
            report.check(format!("M{} relative error", k + 1), rel, format!("<= {tol}"), rel <= tol);
        }
    }
    let (x_lead, amp) = leading_undulation(&traj.state.u);
    if let Some(want) = e.lead_x {
        report.check(
            "leading undulation position".into(),
            x_lead,
            format!("{want} +/- {}", grid.h()),
            (x_lead - want).abs() <= grid.h() * (1.0 + 1e-9),
        );
    }
    if let Some(want) = e.lead_amp {
        let tol = e.amp_rel_tol.unwrap_or(0.01);
        let rel = (amp - want).abs() / want;
        report.check(
            "leading undulation amplitude".into(),
            amp,
            format!("{want} within {tol} relative"),
            rel <= tol,
        );
    }
    emit_series(&mut report, &traj.samples, series_1d);
    Ok(report)
}

fn run_custom(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut report = Report::default();
    let times = default_samples(cfg);
    let diverged = |e: crate::Error| match e {
        crate::Error::Diverged { step, t } => CliError::Diverged(format!("step {step}, t = {t}")),
        other => other.into(),
    };
    if cfg.model.is_2d() {
        let spec = build_model_2d(&cfg.model)?;
        let yiv = cfg.domain.y.unwrap_or(cfg.domain.x);
        let grid = Grid2D::new(grid_of(&cfg.domain.x, cfg.domain.x.n)?, grid_of(&yiv, yiv.n)?);
        let traj = run_2d(&spec, &grid, &TimeConfig::new(cfg.t_final, cfg.tau).with_samples(times))
            .map_err(diverged)?;
        report.summary.push(format!(
            "t = {}, steps = {}, max |u| = {}",
            fmt_g(traj.state.t, 10),
            traj.state.n,
            fmt_e(traj.state.u.max_abs(), 6)
        ));
        if let Some(exact) = spec.exact.clone() {
            let ex = Field2D::sample(|x, y| exact(x, y, traj.state.t), &grid)?;
            let e = error_norms_2d(&traj.state.u, &ex)?;
            report.summary.push(format!("errors: Linf {} L1 {} L2 {}", fmt_e(e.linf, 4), fmt_e(e.l1, 4), fmt_e(e.l2, 4)));
        }
        emit_series(&mut report, &traj.samples, series_2d);
    } else {
        let spec = build_model_1d(&cfg.model)?;
        let grid = grid_of(&cfg.domain.x, cfg.domain.x.n)?;
        let traj = run(&spec, &grid, &time_config(cfg).with_samples(times)).map_err(diverged)?;
        report.summary.push(format!(
            "t = {}, steps = {}, max |u| = {}",
            fmt_g(traj.state.t, 10),
            traj.state.n,
            fmt_e(traj.state.u.max_abs(), 6)
        ));
        if spec.exact.is_some() {
            let ex = exact_field(&spec, &grid, traj.state.t)?;
            let e = error_norms(&traj.state.u, &ex, grid.h())?;
            report.summary.push(format!("errors: Linf {} L1 {} L2 {}", fmt_e(e.linf, 4), fmt_e(e.l1, 4), fmt_e(e.l2, 4)));
        }
        emit_series(&mut report, &traj.samples, series_1d);
    }
    Ok(report)
}

/// Writes every file of the report into `dir`, plus `verdicts.csv` when
/// there are verdicts.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, text) in &report.files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io(&path))?;
    }
    if !report.verdicts.is_empty() {
        let mut t = Table::new(&["check", "value", "target", "pass"]);
        for v in &report.verdicts {
            t.push(vec![
                csv_quote(&v.check),
                fmt_g(v.value, 10),
                csv_quote(&v.target),
                v.pass.to_string(),
            ]);
        }
        let path = dir.join("verdicts.csv");
        std::fs::write(&path, t.to_csv()).map_err(io(&path))?;
    }
    Ok(())
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
