//! Python bindings: `import pycompact6`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use compact6::cli::{parse_config, run_experiment, write_report, CliError};
use compact6::diagnostics::{error_norms, invariants as invariants_of};
use compact6::models::{self, BoreParams, EquationSpec, SolitaryWaveParams};
use compact6::operators::{build_first_derivative, build_second_derivative, first_derivative_all_nodes};
use compact6::stability::{self as stab, SymbolParams};
use compact6::stepper::{self, TauRule, TimeConfig};
use compact6::{make_grid, BoundaryQuad, Closure, Field1D};

fn value_err(e: compact6::Error) -> PyErr {
    match e {
        compact6::Error::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn cli_err(e: CliError) -> PyErr {
    match e.exit_code() {
        1 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Uniform grid on `[a, b]` with `n` intervals.
#[pyclass(frozen, module = "pycompact6")]
pub struct Grid {
    inner: compact6::Grid1D,
}

#[pymethods]
impl Grid {
    #[new]
    fn new(a: f64, b: f64, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: make_grid(a, b, n).map_err(value_err)?,
        })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(a={}, b={}, n={})", self.inner.a(), self.inner.b(), self.inner.n())
    }
}

fn field(grid: &Grid, values: Vec<f64>) -> PyResult<Field1D> {
    Field1D::from_values(grid.inner, values).map_err(value_err)
}

/// First derivative at every node (compact interior, one-sided at the four
/// known nodes).
#[pyfunction]
fn first_derivative(grid: &Grid, values: Vec<f64>) -> PyResult<Vec<f64>> {
    let op = build_first_derivative(&grid.inner, Closure::Dirichlet).map_err(value_err)?;
    first_derivative_all_nodes(&op, &values).map_err(value_err)
}

/// Second derivative at nodes `2..=n-2`.
#[pyfunction]
fn second_derivative(grid: &Grid, values: Vec<f64>) -> PyResult<Vec<f64>> {
    let op = build_second_derivative(&grid.inner, Closure::Dirichlet).map_err(value_err)?;
    let u = field(grid, values)?;
    op.apply(&u, &BoundaryQuad::from_values(&u.values)).map_err(value_err)
}

/// `(I1, I2, I3)` by composite Simpson.
#[pyfunction]
fn invariants(grid: &Grid, values: Vec<f64>, delta: f64) -> PyResult<(f64, f64, f64)> {
    let op = build_first_derivative(&grid.inner, Closure::Dirichlet).map_err(value_err)?;
    let r = invariants_of(&field(grid, values)?, delta, &op, 0.0).map_err(value_err)?;
    Ok((r.values[0], r.values[1], r.values[2]))
}

/// `(tau, theta, unconditionally_unstable)`; `theta` is None when no phase
/// restricts the step.
#[pyfunction]
#[pyo3(signature = (alpha, gamma, delta, h, growth = 0.0))]
fn max_stable_tau(alpha: f64, gamma: f64, delta: f64, h: f64, growth: f64) -> (f64, Option<f64>, bool) {
    let s = stab::max_stable_tau(alpha, gamma, delta, h, growth);
    (s.tau, s.theta, s.unconditionally_unstable)
}

/// Fully discrete amplification factor `L(theta)`.
#[pyfunction]
fn amplification(alpha: f64, gamma: f64, delta: f64, h: f64, tau: f64, theta: f64) -> (f64, f64) {
    let l = stab::fully_discrete_amplification(&SymbolParams::new(alpha, gamma, delta, h).with_tau(tau).at(theta));
    (l.re, l.im)
}

/// Semi-discrete amplification factor `C(theta)`.
#[pyfunction]
fn semi_discrete_amplification(alpha: f64, gamma: f64, delta: f64, h: f64, theta: f64) -> (f64, f64) {
    let c = stab::semi_discrete_amplification(&SymbolParams::new(alpha, gamma, delta, h).at(theta));
    (c.re, c.im)
}

/// An equation with its initial and boundary data.
#[pyclass(frozen, module = "pycompact6")]
pub struct Model {
    spec: EquationSpec,
}

#[pymethods]
impl Model {
    /// Linear Sobolev equation started from `sin x`.
    #[staticmethod]
    fn linear_sobolev(alpha: f64, gamma: f64, delta: f64) -> PyResult<Self> {
        let spec = models::linear_sobolev_sine(alpha, gamma, delta).map_err(value_err)?;
        Ok(Self { spec })
    }

    /// Equal Width equation carrying one solitary wave.
    #[staticmethod]
    fn ew_solitary(c: f64, x0: f64, delta: f64) -> PyResult<Self> {
        let p = SolitaryWaveParams::new(c, x0, delta).map_err(value_err)?;
        Ok(Self {
            spec: models::ew_solitary(&p).map_err(value_err)?,
        })
    }

    /// Equal Width undular bore.
    #[staticmethod]
    fn ew_bore(u0: f64, d: f64, xc: f64, delta: f64) -> PyResult<Self> {
        let p = BoreParams::new(u0, d, xc).map_err(value_err)?;
        Ok(Self {
            spec: models::ew_bore(&p, delta).map_err(value_err)?,
        })
    }

    /// Forced BBM-Burgers with exact solution `sech(x - t)`.
    #[staticmethod]
    fn bbmb() -> Self {
        Self {
            spec: models::bbmb_sech(),
        }
    }

    #[getter]
    fn name(&self) -> &str {
        &self.spec.name
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.spec.delta
    }

    /// Exact solution at `(x, t)`, or None.
    fn exact(&self, x: f64, t: f64) -> Option<f64> {
        self.spec.exact_at(x, t)
    }

    /// Steps to `t_final`. `tau=None` uses `h^6`. Samples are taken at the
    /// step nearest each requested time.
    #[pyo3(signature = (grid, t_final, tau = None, samples = Vec::new()))]
    fn run(
        &self,
        py: Python<'_>,
        grid: &Grid,
        t_final: f64,
        tau: Option<f64>,
        samples: Vec<f64>,
    ) -> PyResult<RunResult> {
        let rule = tau.map_or(TauRule::H6, TauRule::Fixed);
        let cfg = TimeConfig::new(t_final, rule).with_samples(samples);
        let spec = &self.spec;
        let g = grid.inner;
        let traj = py.detach(|| stepper::run(spec, &g, &cfg)).map_err(value_err)?;
        let linf_error = match &spec.exact {
            Some(f) => {
                let ex = compact6::sample(|x| f(x, traj.state.t), &g).map_err(value_err)?;
                Some(error_norms(&traj.state.u, &ex, g.h()).map_err(value_err)?.linf)
            }
            None => None,
        };
        Ok(RunResult {
            tau: traj.tau,
            t: traj.state.t,
            steps: traj.state.n,
            u: traj.state.u.values,
            samples: traj.samples.into_iter().map(|s| (s.t, s.field.values)).collect(),
            linf_error,
        })
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.spec.name)
    }
}

#[pyclass(frozen, get_all, module = "pycompact6")]
pub struct RunResult {
    tau: f64,
    t: f64,
    steps: u64,
    /// Final field at every node.
    u: Vec<f64>,
    /// `(t, values)` per requested sample.
    samples: Vec<(f64, Vec<f64>)>,
    /// Max-norm error against the exact solution, when there is one.
    linf_error: Option<f64>,
}

type VerdictRow = (String, f64, String, bool);

/// Runs a JSON experiment config. Returns `(passed, verdicts)` with
/// verdicts as `(check, value, target, pass)`; writes CSVs when `out` is set.
#[pyfunction]
#[pyo3(signature = (path, out = None))]
fn run_config(
    py: Python<'_>,
    path: PathBuf,
    out: Option<PathBuf>,
) -> PyResult<(bool, Vec<VerdictRow>)> {
    let report = py
        .detach(|| {
            let cfg = parse_config(&path)?;
            let report = run_experiment(&cfg)?;
            if let Some(dir) = &out {
                write_report(&report, dir)?;
            }
            Ok(report)
        })
        .map_err(cli_err)?;
    let verdicts = report
        .verdicts
        .iter()
        .map(|v| (v.check.clone(), v.value, v.target.clone(), v.pass))
        .collect();
    Ok((report.passed(), verdicts))
}

#[pymodule]
pub fn pycompact6(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_class::<Model>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(first_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(second_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(invariants, m)?)?;
    m.add_function(wrap_pyfunction!(max_stable_tau, m)?)?;
    m.add_function(wrap_pyfunction!(amplification, m)?)?;
    m.add_function(wrap_pyfunction!(semi_discrete_amplification, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
