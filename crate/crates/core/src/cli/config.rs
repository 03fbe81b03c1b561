//! Experiment configuration: JSON text validated field by field against a
//! fixed schema. Every violation is collected with its JSON-pointer path.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::grid::MIN_INTERVALS;
use crate::stepper::TauRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ConvergenceSpace,
    ConvergenceTime,
    StabilitySweep,
    DecayCheck,
    Solitary,
    Interaction,
    Bore,
    Bbmb,
    Custom,
}

impl ExperimentKind {
    pub const ALL: [(&'static str, ExperimentKind); 9] = [
        ("convergence_space", ExperimentKind::ConvergenceSpace),
        ("convergence_time", ExperimentKind::ConvergenceTime),
        ("stability_sweep", ExperimentKind::StabilitySweep),
        ("decay_check", ExperimentKind::DecayCheck),
        ("solitary", ExperimentKind::Solitary),
        ("interaction", ExperimentKind::Interaction),
        ("bore", ExperimentKind::Bore),
        ("bbmb", ExperimentKind::Bbmb),
        ("custom", ExperimentKind::Custom),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, k)| *k == self).map(|(n, _)| *n).unwrap_or("?")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveConfig {
    pub c: f64,
    pub k: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    LinearSobolev { alpha: f64, gamma: f64, delta: f64 },
    LinearSobolev2D { alpha_x: f64, alpha_y: f64, gamma: f64, delta: f64 },
    EwSolitary { c: f64, x0: f64, delta: f64 },
    EwMultiSoliton { delta: f64, waves: Vec<WaveConfig> },
    EwBore { u0: f64, d: f64, xc: f64, delta: f64 },
    Bbmb,
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::LinearSobolev { .. } => "linear_sobolev",
            ModelConfig::LinearSobolev2D { .. } => "linear_sobolev_2d",
            ModelConfig::EwSolitary { .. } => "ew_solitary",
            ModelConfig::EwMultiSoliton { .. } => "ew_multi_soliton",
            ModelConfig::EwBore { .. } => "ew_bore",
            ModelConfig::Bbmb => "bbmb",
        }
    }

    pub fn is_2d(&self) -> bool {
        matches!(self, ModelConfig::LinearSobolev2D { .. })
    }

    pub fn has_exact(&self) -> bool {
        matches!(
            self,
            ModelConfig::LinearSobolev { .. }
                | ModelConfig::LinearSobolev2D { .. }
                | ModelConfig::EwSolitary { .. }
                | ModelConfig::Bbmb
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainConfig {
    pub x: Interval,
    /// Second direction for 2D models; defaults to a copy of `x`.
    pub y: Option<Interval>,
}

/// Optional pass/fail targets checked after a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expectations {
    pub rate: Option<f64>,
    pub rate_tol: Option<f64>,
    /// Reference `[linf, l1, l2]` per ladder entry.
    pub reference: Option<Vec<[f64; 3]>>,
    pub factor: Option<f64>,
    pub bounded: Vec<f64>,
    pub diverged: Vec<f64>,
    pub bounded_max: Option<f64>,
    /// Bounds on the three percentage invariant errors at the final time.
    pub max_pct: Option<[f64; 3]>,
    pub rates_rel_tol: Option<f64>,
    pub lead_x: Option<f64>,
    pub lead_amp: Option<f64>,
    pub amp_rel_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    pub domain: DomainConfig,
    pub t_final: f64,
    pub tau: TauRule,
    pub ladder: Vec<usize>,
    pub taus: Vec<f64>,
    pub expect: Expectations,
    pub blowup_threshold: f64,
    pub growth_constant: f64,
    pub sample_times: Vec<f64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text)?;
    let mut c = Checker::default();
    let cfg = c.config(&value);
    match cfg {
        Some(cfg) if c.errors.is_empty() => Ok(cfg),
        _ => Err(ConfigError::Invalid(c.errors)),
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<String>,
}

fn ptr(base: &str, key: &str) -> String {
    format!("{base}/{}", key.replace('~', "~0").replace('/', "~1"))
}

impl Checker {
    fn err(&mut self, at: &str, msg: impl std::fmt::Display) {
        let at = if at.is_empty() { "/" } else { at };
        self.errors.push(format!("{at}: {msg}"));
    }

    /// The object at `at`, after rejecting keys outside `allowed`.
    fn object<'v>(&mut self, v: &'v Value, at: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        let Some(map) = v.as_object() else {
            self.err(at, "expected an object");
            return None;
        };
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        for key in map.keys() {
            if !allowed.contains(key.as_str()) {
                self.err(&ptr(at, key), "unknown key");
            }
        }
        Some(map)
    }

    fn required<'v>(&mut self, map: &'v Map<String, Value>, at: &str, key: &str) -> Option<&'v Value> {
        let v = map.get(key);
        if v.is_none() {
            self.err(&ptr(at, key), "missing required key");
        }
        v
    }

    fn number(&mut self, v: &Value, at: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(at, "expected a finite number");
                None
            }
        }
    }

    fn num_key(&mut self, map: &Map<String, Value>, at: &str, key: &str) -> Option<f64> {
        let v = self.required(map, at, key)?;
        self.number(v, &ptr(at, key))
    }

    fn opt_num(&mut self, map: &Map<String, Value>, at: &str, key: &str) -> Option<f64> {
        map.get(key).and_then(|v| self.number(v, &ptr(at, key)))
    }

    fn positive(&mut self, x: Option<f64>, at: &str) -> Option<f64> {
        match x {
            Some(x) if x > 0.0 => Some(x),
            Some(x) => {
                self.err(at, format!("must be positive, got {x}"));
                None
            }
            None => None,
        }
    }

    fn non_negative(&mut self, x: Option<f64>, at: &str) -> Option<f64> {
        match x {
            Some(x) if x >= 0.0 => Some(x),
            Some(x) => {
                self.err(at, format!("must be non-negative, got {x}"));
                None
            }
            None => None,
        }
    }

    fn intervals(&mut self, v: &Value, at: &str) -> Option<usize> {
        let n = v.as_u64().or_else(|| {
            v.as_f64()
                .filter(|x| x.fract() == 0.0 && *x >= 0.0)
                .map(|x| x as u64)
        });
        match n {
            Some(n) if n as usize >= MIN_INTERVALS => Some(n as usize),
            Some(n) => {
                self.err(at, format!("grid needs N >= {MIN_INTERVALS} intervals, got {n}"));
                None
            }
            None => {
                self.err(at, "expected a non-negative integer");
                None
            }
        }
    }

    fn num_array(&mut self, v: &Value, at: &str) -> Option<Vec<f64>> {
        let Some(items) = v.as_array() else {
            self.err(at, "expected an array of numbers");
            return None;
        };
        let out: Vec<Option<f64>> = items
            .iter()
            .enumerate()
            .map(|(i, x)| self.number(x, &format!("{at}/{i}")))
            .collect();
        out.into_iter().collect()
    }

    fn interval(&mut self, v: &Value, at: &str) -> Option<Interval> {
        let map = self.object(v, at, &["a", "b", "n"])?;
        let a = self.num_key(map, at, "a");
        let b = self.num_key(map, at, "b");
        let n = self.required(map, at, "n").and_then(|v| self.intervals(v, &ptr(at, "n")));
        if let (Some(a), Some(b)) = (a, b) {
            if !(b > a) {
                self.err(at, format!("need a < b, got a = {a}, b = {b}"));
                return None;
            }
        }
        Some(Interval { a: a?, b: b?, n: n? })
    }

    fn model(&mut self, v: &Value, at: &str) -> Option<ModelConfig> {
        let kind = v.get("kind").and_then(Value::as_str);
        let fields: &[&str] = match kind {
            Some("linear_sobolev") => &["kind", "alpha", "gamma", "delta"],
            Some("linear_sobolev_2d") => &["kind", "alpha_x", "alpha_y", "gamma", "delta"],
            Some("ew_solitary") => &["kind", "c", "x0", "delta"],
            Some("ew_multi_soliton") => &["kind", "delta", "waves"],
            Some("ew_bore") => &["kind", "u0", "d", "xc", "delta"],
            Some("bbmb") => &["kind"],
            Some(other) => {
                self.err(
                    &ptr(at, "kind"),
                    format!(
                        "unknown model {other:?}; expected one of linear_sobolev, linear_sobolev_2d, \
                         ew_solitary, ew_multi_soliton, ew_bore, bbmb"
                    ),
                );
                return None;
            }
            None => {
                self.err(&ptr(at, "kind"), "missing or non-string model kind");
                return None;
            }
        };
        let map = self.object(v, at, fields)?;
        let nn = |c: &mut Self, key: &str| {
            let x = c.num_key(map, at, key);
            c.non_negative(x, &ptr(at, key))
        };
        let pos = |c: &mut Self, key: &str| {
            let x = c.num_key(map, at, key);
            c.positive(x, &ptr(at, key))
        };
        match kind? {
            "linear_sobolev" => {
                let alpha = self.num_key(map, at, "alpha");
                let (gamma, delta) = (nn(self, "gamma"), nn(self, "delta"));
                Some(ModelConfig::LinearSobolev {
                    alpha: alpha?,
                    gamma: gamma?,
                    delta: delta?,
                })
            }
            "linear_sobolev_2d" => {
                let alpha_x = self.num_key(map, at, "alpha_x");
                let alpha_y = self.num_key(map, at, "alpha_y");
                let (gamma, delta) = (nn(self, "gamma"), nn(self, "delta"));
                Some(ModelConfig::LinearSobolev2D {
                    alpha_x: alpha_x?,
                    alpha_y: alpha_y?,
                    gamma: gamma?,
                    delta: delta?,
                })
            }
            "ew_solitary" => {
                let c = self.num_key(map, at, "c");
                let x0 = self.num_key(map, at, "x0");
                let delta = pos(self, "delta");
                Some(ModelConfig::EwSolitary {
                    c: c?,
                    x0: x0?,
                    delta: delta?,
                })
            }
            "ew_multi_soliton" => {
                let delta = pos(self, "delta");
                let waves_at = ptr(at, "waves");
                let waves = self.required(map, at, "waves").and_then(|w| {
                    let Some(items) = w.as_array().filter(|a| !a.is_empty()) else {
                        self.err(&waves_at, "expected a non-empty array of waves");
                        return None;
                    };
                    let out: Vec<Option<WaveConfig>> = items
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            let wat = format!("{waves_at}/{i}");
                            let m = self.object(w, &wat, &["c", "k", "x"])?;
                            let c = self.num_key(m, &wat, "c");
                            let k = self.num_key(m, &wat, "k");
                            let k = self.positive(k, &ptr(&wat, "k"));
                            let x = self.num_key(m, &wat, "x");
                            Some(WaveConfig { c: c?, k: k?, x: x? })
                        })
                        .collect();
                    out.into_iter().collect()
                });
                Some(ModelConfig::EwMultiSoliton {
                    delta: delta?,
                    waves: waves?,
                })
            }
            "ew_bore" => {
                let (u0, d) = (pos(self, "u0"), pos(self, "d"));
                let xc = self.num_key(map, at, "xc");
                let delta = pos(self, "delta");
                Some(ModelConfig::EwBore {
                    u0: u0?,
                    d: d?,
                    xc: xc?,
                    delta: delta?,
                })
            }
            _ => Some(ModelConfig::Bbmb),
        }
    }

    fn expectations(&mut self, v: &Value, at: &str) -> Option<Expectations> {
        let map = self.object(
            v,
            at,
            &[
                "rate",
                "rate_tol",
                "reference",
                "factor",
                "bounded",
                "diverged",
                "bounded_max",
                "max_pct",
                "rates_rel_tol",
                "lead_x",
                "lead_amp",
                "amp_rel_tol",
            ],
        )?;
        let mut e = Expectations {
            rate: self.opt_num(map, at, "rate"),
            rate_tol: self.opt_num(map, at, "rate_tol"),
            factor: self.opt_num(map, at, "factor"),
            bounded_max: self.opt_num(map, at, "bounded_max"),
            rates_rel_tol: self.opt_num(map, at, "rates_rel_tol"),
            lead_x: self.opt_num(map, at, "lead_x"),
            lead_amp: self.opt_num(map, at, "lead_amp"),
            amp_rel_tol: self.opt_num(map, at, "amp_rel_tol"),
            ..Default::default()
        };
        for key in ["bounded", "diverged"] {
            if let Some(list) = map.get(key).and_then(|v| self.num_array(v, &ptr(at, key))) {
                if key == "bounded" {
                    e.bounded = list;
                } else {
                    e.diverged = list;
                }
            }
        }
        if let Some(v) = map.get("max_pct") {
            let at = ptr(at, "max_pct");
            match self.num_array(v, &at) {
                Some(l) if l.len() == 3 => e.max_pct = Some([l[0], l[1], l[2]]),
                Some(_) => self.err(&at, "expected three numbers"),
                None => {}
            }
        }
        if let Some(v) = map.get("reference") {
            let at = ptr(at, "reference");
            match v.as_array() {
                Some(rows) => {
                    let mut out = Vec::with_capacity(rows.len());
                    for (i, r) in rows.iter().enumerate() {
                        let rat = format!("{at}/{i}");
                        match self.num_array(r, &rat) {
                            Some(l) if l.len() == 3 => out.push([l[0], l[1], l[2]]),
                            Some(_) => self.err(&rat, "expected [linf, l1, l2]"),
                            None => {}
                        }
                    }
                    e.reference = Some(out);
                }
                None => self.err(&at, "expected an array of [linf, l1, l2] rows"),
            }
        }
        Some(e)
    }

    fn config(&mut self, v: &Value) -> Option<ExperimentConfig> {
        let map = self.object(
            v,
            "",
            &[
                "experiment",
                "model",
                "domain",
                "time",
                "ladder",
                "taus",
                "expect",
                "blowup_threshold",
                "growth_constant",
                "outputs",
            ],
        )?;
        let experiment = self.required(map, "", "experiment").and_then(|v| {
            let name = v.as_str();
            let kind = ExperimentKind::ALL.iter().find(|(n, _)| Some(*n) == name).map(|(_, k)| *k);
            if kind.is_none() {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|(n, _)| *n).collect();
                self.err("/experiment", format!("expected one of {}", names.join(", ")));
            }
            kind
        });
        let model = self.required(map, "", "model").and_then(|v| self.model(v, "/model"));

        let domain = self.required(map, "", "domain").and_then(|v| {
            let m = self.object(v, "/domain", &["a", "b", "n", "y"])?;
            let a = self.num_key(m, "/domain", "a");
            let b = self.num_key(m, "/domain", "b");
            let n = self.required(m, "/domain", "n").and_then(|v| self.intervals(v, "/domain/n"));
            if let (Some(a), Some(b)) = (a, b) {
                if !(b > a) {
                    self.err("/domain", format!("need a < b, got a = {a}, b = {b}"));
                    return None;
                }
            }
            let y = match m.get("y") {
                Some(v) => Some(self.interval(v, "/domain/y")?),
                None => None,
            };
            Some(DomainConfig {
                x: Interval { a: a?, b: b?, n: n? },
                y,
            })
        });

        let time = self.required(map, "", "time").and_then(|v| {
            let m = self.object(v, "/time", &["t_final", "tau"])?;
            let t = self.num_key(m, "/time", "t_final");
            let t = self.positive(t, "/time/t_final");
            let tau = self.required(m, "/time", "tau").and_then(|v| match v {
                Value::String(s) if s == "h6" => Some(TauRule::H6),
                Value::Number(_) => {
                    let x = self.number(v, "/time/tau");
                    self.positive(x, "/time/tau").map(TauRule::Fixed)
                }
                _ => {
                    self.err("/time/tau", "expected \"h6\" or a positive number");
                    None
                }
            });
            Some((t?, tau?))
        });

        let ladder = match map.get("ladder") {
            Some(v) => match v.as_array() {
                Some(items) if !items.is_empty() => {
                    let l: Vec<Option<usize>> = items
                        .iter()
                        .enumerate()
                        .map(|(i, x)| self.intervals(x, &format!("/ladder/{i}")))
                        .collect();
                    l.into_iter().collect::<Option<Vec<_>>>()
                }
                _ => {
                    self.err("/ladder", "expected a non-empty array of grid sizes");
                    None
                }
            },
            None => Some(Vec::new()),
        };
        let taus = match map.get("taus") {
            Some(v) => self.num_array(v, "/taus").and_then(|l| {
                let bad: Vec<usize> = (0..l.len()).filter(|&i| !(l[i] > 0.0)).collect();
                for i in &bad {
                    self.err(&format!("/taus/{i}"), "must be positive");
                }
                bad.is_empty().then_some(l)
            }),
            None => Some(Vec::new()),
        };
        let expect = match map.get("expect") {
            Some(v) => self.expectations(v, "/expect"),
            None => Some(Expectations::default()),
        };
        let blowup = self.opt_num(map, "", "blowup_threshold");
        let blowup = match blowup {
            Some(_) => self.positive(blowup, "/blowup_threshold"),
            None => Some(1e6),
        };
        let growth = match self.opt_num(map, "", "growth_constant") {
            Some(g) => self.non_negative(Some(g), "/growth_constant"),
            None => Some(0.0),
        };
        let outputs = match map.get("outputs") {
            Some(v) => (|| {
                let m = self.object(v, "/outputs", &["sample_times", "dir"])?;
                let times = match m.get("sample_times") {
                    Some(v) => self.num_array(v, "/outputs/sample_times")?,
                    None => Vec::new(),
                };
                let dir = match m.get("dir") {
                    Some(Value::String(s)) => Some(PathBuf::from(s)),
                    Some(_) => {
                        self.err("/outputs/dir", "expected a string");
                        return None;
                    }
                    None => None,
                };
                Some((times, dir))
            })(),
            None => Some((Vec::new(), None)),
        };

        let (experiment, model, domain, (t_final, tau)) = (experiment?, model?, domain?, time?);
        let (ladder, taus, expect) = (ladder?, taus?, expect?);
        let (blowup_threshold, growth_constant, (sample_times, out_dir)) = (blowup?, growth?, outputs?);
        let cfg = ExperimentConfig {
            experiment,
            model,
            domain,
            t_final,
            tau,
            ladder,
            taus,
            expect,
            blowup_threshold,
            growth_constant,
            sample_times,
            out_dir,
        };
        self.cross_check(&cfg);
        Some(cfg)
    }

    /// Constraints linking the experiment kind to the other sections.
    fn cross_check(&mut self, cfg: &ExperimentConfig) {
        use ExperimentKind::*;
        let model = &cfg.model;
        let kind = cfg.experiment;
        let need_model = |c: &mut Self, ok: bool, what: &str| {
            if !ok {
                c.err(
                    "/model/kind",
                    format!("experiment {} needs {what}, got {}", kind.name(), model.kind()),
                );
            }
        };
        match kind {
            ConvergenceSpace => need_model(self, model.has_exact(), "a model with an exact solution"),
            ConvergenceTime => need_model(
                self,
                model.has_exact() && !model.is_2d(),
                "a 1D model with an exact solution",
            ),
            StabilitySweep => need_model(self, !model.is_2d(), "a 1D model"),
            DecayCheck => need_model(
                self,
                matches!(model, ModelConfig::LinearSobolev { .. }),
                "the linear_sobolev model",
            ),
            Solitary => need_model(self, matches!(model, ModelConfig::EwSolitary { .. }), "ew_solitary"),
            Interaction => need_model(
                self,
                matches!(model, ModelConfig::EwMultiSoliton { .. }),
                "ew_multi_soliton",
            ),
            Bore => need_model(self, matches!(model, ModelConfig::EwBore { .. }), "ew_bore"),
            Bbmb => need_model(self, matches!(model, ModelConfig::Bbmb), "bbmb"),
            Custom => {}
        }
        if matches!(kind, ConvergenceTime | StabilitySweep) && cfg.taus.is_empty() {
            self.err("/taus", format!("experiment {} needs a non-empty taus list", kind.name()));
        }
        if cfg.domain.y.is_some() && !model.is_2d() {
            self.err("/domain/y", "only 2D models take a y interval");
        }
        if let Some(bad) = cfg
            .sample_times
            .iter()
            .position(|t| !(*t >= 0.0 && *t <= cfg.t_final))
        {
            self.err(
                &format!("/outputs/sample_times/{bad}"),
                format!("must lie in [0, {}]", cfg.t_final),
            );
        }
        if let Some(r) = &cfg.expect.reference {
            let runs = if cfg.ladder.is_empty() { 1 } else { cfg.ladder.len() };
            let runs = if kind == ConvergenceTime { cfg.taus.len() } else { runs };
            if r.len() != runs {
                self.err(
                    "/expect/reference",
                    format!("expected {runs} rows (one per run), got {}", r.len()),
                );
            }
        }
    }
}
