//! Forward Euler in time with the implicit compact mass operator.
//!
//! Writing `D1 U = A1^{-1}(B1 U + C1) / h` and `D2 U = A2^{-1}(B2 U + C2) / h^2`,
//! one step of `(u - delta u_xx)_t = -f'(u) u_x + gamma u_xx + g` reads
//!
//! ```text
//! (h^2 A2 - delta B2) U^{n+1} = h^2 A2 (U^n - delta D2 U^n + tau R^n) + delta C2^{n+1}
//! R^n = -f'(U^n) D1 U^n + gamma D2 U^n + g^n
//! ```
//!
//! so the only implicit work is one banded solve with a matrix that depends on
//! the grid and `delta` alone. In 2D the same step is taken with derivative
//! sweeps along grid lines and an exact solve of `I - delta (Dxx + Dyy)`.

use nalgebra::DMatrix;

use crate::banded::{BandedLu, BandedMatrix};
use crate::grid::{Field1D, Field2D, Grid1D, Grid2D};
use crate::models::{EquationSpec, EquationSpec2D};
use crate::operators::{
    build_first_derivative, build_second_derivative, BoundaryQuad, Closure, DerivativeOperator,
    DerivativeOrder,
};
use crate::{Error, Result};

/// Magnitude beyond which a run is declared diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Finished,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub u: Field1D,
    pub t: f64,
    pub n: u64,
    pub status: Status,
}

impl SimState {
    /// Samples the initial profile and overwrites the known nodes with the
    /// boundary data at `t = 0`.
    pub fn initial(spec: &EquationSpec, grid: &Grid1D) -> Result<Self> {
        let mut u = crate::grid::sample(|x| (spec.initial)(x), grid)?;
        write_boundary(&mut u.values, &spec.boundary_quad(grid, 0.0)?);
        Ok(Self {
            u,
            t: 0.0,
            n: 0,
            status: Status::Running,
        })
    }
}

fn write_boundary(values: &mut [f64], q: &BoundaryQuad) {
    let n = values.len() - 1;
    values[0] = q.0[0];
    values[1] = q.0[1];
    values[n - 1] = q.0[2];
    values[n] = q.0[3];
}

fn diverged(values: &[f64]) -> bool {
    values.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT))
}

/// The factored matrix `h^2 A2 - delta B2` together with `h^2 A2`.
#[derive(Debug, Clone)]
pub struct MassSystem {
    delta: f64,
    matrix: BandedMatrix,
    h2a2: BandedMatrix,
    lu: BandedLu,
}

pub fn assemble_mass_system(grid: &Grid1D, delta: f64, op2: &DerivativeOperator) -> Result<MassSystem> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be non-negative, got {delta}")));
    }
    if op2.order() != DerivativeOrder::Second || op2.closure() != Closure::Dirichlet {
        return Err(Error::InvalidParameter(
            "mass system needs the Dirichlet second-derivative operator".into(),
        ));
    }
    if op2.grid() != grid {
        return Err(Error::InvalidParameter("operator built on a different grid".into()));
    }
    let h2 = grid.h() * grid.h();
    let h2a2 = op2.lhs().combine(h2, op2.lhs(), 0.0)?;
    let matrix = op2.lhs().combine(h2, op2.rhs(), -delta)?;
    let lu = matrix.factor()?;
    Ok(MassSystem {
        delta,
        matrix,
        h2a2,
        lu,
    })
}

impl MassSystem {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    /// `h^2 A2`.
    pub fn h2a2(&self) -> &BandedMatrix {
        &self.h2a2
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(rhs)
    }

    #[inline]
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.lu.solve_in_place(rhs)
    }
}

/// Operators and the factored mass matrix for one grid and equation.
#[derive(Debug, Clone)]
pub struct SteppingPlan {
    pub grid: Grid1D,
    pub tau: f64,
    pub d1: DerivativeOperator,
    pub d2: DerivativeOperator,
    pub mass: MassSystem,
    pub sample_times: Vec<f64>,
}

impl SteppingPlan {
    pub fn new(spec: &EquationSpec, grid: &Grid1D, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
        let d1 = build_first_derivative(grid, Closure::Dirichlet)?;
        let d2 = build_second_derivative(grid, Closure::Dirichlet)?;
        let mass = assemble_mass_system(grid, spec.delta, &d2)?;
        Ok(Self {
            grid: *grid,
            tau,
            d1,
            d2,
            mass,
            sample_times: Vec::new(),
        })
    }
}

/// Scratch vectors reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    ux: Vec<f64>,
    uxx: Vec<f64>,
    w: Vec<f64>,
    rhs: Vec<f64>,
    xs: Vec<f64>,
}

impl Workspace {
    pub fn new(grid: &Grid1D) -> Self {
        let m = grid.n() - 3;
        Self {
            ux: vec![0.0; m],
            uxx: vec![0.0; m],
            w: vec![0.0; m],
            rhs: vec![0.0; m],
            xs: (2..grid.n() - 1).map(|j| grid.node(j)).collect(),
        }
    }
}

/// Advances `state` by `tau`. A diverged state is left untouched.
pub fn step_1d(
    state: &mut SimState,
    spec: &EquationSpec,
    plan: &SteppingPlan,
    ws: &mut Workspace,
    tau: f64,
) -> Result<()> {
    if state.status == Status::Diverged {
        return Ok(());
    }
    let grid = &plan.grid;
    if state.u.values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: state.u.values.len(),
        });
    }
    let n = grid.n();
    let t = state.t;
    let q_now = spec.boundary_quad(grid, t)?;
    let q_next = spec.boundary_quad(grid, t + tau)?;

    let u = &state.u.values[2..n - 1];
    plan.d1.apply_unknowns(u, &q_now, &mut ws.ux);
    plan.d2.apply_unknowns(u, &q_now, &mut ws.uxx);

    let (gamma, delta) = (spec.gamma, spec.delta);
    for k in 0..u.len() {
        let mut r = -spec.flux.derivative(u[k]) * ws.ux[k] + gamma * ws.uxx[k];
        if let Some(g) = &spec.forcing {
            r += g(ws.xs[k], t);
        }
        ws.w[k] = tau * r;
    }
    // Increment form: M (u^{n+1} - u^n) = tau h^2 A2 r + delta (C(q^{n+1}) - C(q^n)).
    // Solving for the full u^{n+1} instead costs an O(eps / h^2) rounding
    // error per step, which accumulates over long h^6 step sequences.
    plan.mass.h2a2.matvec_into(&ws.w, &mut ws.rhs);
    if delta != 0.0 {
        for (r, wts) in plan.d2.correction_weights() {
            let c: f64 = (0..4).map(|i| wts[i] * (q_next.0[i] - q_now.0[i])).sum();
            ws.rhs[*r] += delta * c;
        }
    }
    plan.mass.solve_in_place(&mut ws.rhs);

    let values = &mut state.u.values;
    for (v, d) in values[2..n - 1].iter_mut().zip(&ws.rhs) {
        *v += d;
    }
    write_boundary(values, &q_next);
    state.n += 1;
    state.t = t + tau;
    if diverged(values) {
        state.status = Status::Diverged;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// `tau = h^6`
    H6,
    Fixed(f64),
}

impl TauRule {
    pub fn resolve(&self, h: f64) -> f64 {
        match *self {
            TauRule::H6 => h.powi(6),
            TauRule::Fixed(tau) => tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub t_final: f64,
    pub tau: TauRule,
    /// Requested output times in `[0, t_final]`.
    pub sample_times: Vec<f64>,
}

impl TimeConfig {
    pub fn new(t_final: f64, tau: TauRule) -> Self {
        Self {
            t_final,
            tau,
            sample_times: Vec::new(),
        }
    }

    pub fn with_samples(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }
}

/// Number of full steps of size `tau` and the length of a shortened final
/// step, if one is needed to land on `t_final`.
pub fn step_schedule(t_final: f64, tau: f64) -> (u64, Option<f64>) {
    let ratio = t_final / tau;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        (nearest as u64, None)
    } else {
        let full = ratio.floor();
        let rest = t_final - full * tau;
        (full as u64, (rest > 0.0).then_some(rest))
    }
}

/// Sizes of every step taken to reach `t_final`.
pub fn step_sizes(t_final: f64, tau: f64) -> impl Iterator<Item = f64> {
    let (full, last) = step_schedule(t_final, tau);
    std::iter::repeat_n(tau, full as usize).chain(last)
}

#[derive(Debug, Clone)]
pub struct Sample<F> {
    pub requested: f64,
    pub t: f64,
    pub field: F,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tau: f64,
    pub samples: Vec<Sample<Field1D>>,
    pub state: SimState,
}

fn validate_time(cfg: &TimeConfig, tau: f64) -> Result<Vec<f64>> {
    if !(cfg.t_final >= 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("final time must be non-negative, got {}", cfg.t_final)));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
    }
    let mut times = cfg.sample_times.clone();
    if let Some(bad) = times.iter().find(|t| !(**t >= 0.0 && **t <= cfg.t_final * (1.0 + 1e-12))) {
        return Err(Error::InvalidParameter(format!(
            "sample time {bad} outside [0, {}]",
            cfg.t_final
        )));
    }
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Time loop shared by 1D and 2D: calls `advance(tau)` per step and
/// `record(requested)` when the current state is the nearest to a requested
/// sample time. Stops early when `advance` returns `false`.
fn drive(
    t_final: f64,
    tau: f64,
    sample_times: &[f64],
    mut advance: impl FnMut(f64, bool) -> Result<bool>,
    mut record: impl FnMut(f64),
) -> Result<()> {
    let mut pending = sample_times.iter().copied().peekable();
    let mut t = 0.0;
    let mut sizes = step_sizes(t_final, tau).peekable();
    loop {
        let next = sizes.next();
        let reach = t + next.map_or(f64::INFINITY, |s| 0.5 * s);
        while let Some(&ts) = pending.peek() {
            if ts <= reach {
                record(ts);
                pending.next();
            } else {
                break;
            }
        }
        let Some(size) = next else { break };
        let last = sizes.peek().is_none();
        if !advance(size, last)? {
            break;
        }
        t += size;
    }
    Ok(())
}

/// Runs to `cfg.t_final`. `observe` sees the state after each step and may
/// stop the run early by returning `false`. Divergence is reported through
/// the returned state's status rather than as an error.
pub fn run_with(
    spec: &EquationSpec,
    grid: &Grid1D,
    cfg: &TimeConfig,
    mut observe: impl FnMut(&SimState) -> bool,
) -> Result<Trajectory> {
    let tau = cfg.tau.resolve(grid.h());
    let times = validate_time(cfg, tau)?;
    let plan = SteppingPlan::new(spec, grid, tau)?;
    let mut ws = Workspace::new(grid);
    let mut state = SimState::initial(spec, grid)?;
    let mut samples = Vec::with_capacity(times.len());
    let full_time = |n: u64| n as f64 * tau;

    // Borrow juggling: the recorder needs the state the stepper mutates.
    let state_cell = std::cell::RefCell::new(&mut state);
    drive(
        cfg.t_final,
        tau,
        &times,
        |size, last| {
            let mut st = state_cell.borrow_mut();
            step_1d(&mut st, spec, &plan, &mut ws, size)?;
            if size == tau {
                st.t = full_time(st.n);
            }
            if last {
                st.t = cfg.t_final;
            }
            if st.status == Status::Diverged {
                return Ok(false);
            }
            Ok(observe(&st))
        },
        |requested| {
            let st = state_cell.borrow();
            samples.push(Sample {
                requested,
                t: st.t,
                field: st.u.clone(),
            });
        },
    )?;
    if state.status == Status::Running && (state.t - cfg.t_final).abs() <= 1e-12 * cfg.t_final.max(1.0) {
        state.status = Status::Finished;
    }
    Ok(Trajectory { tau, samples, state })
}

/// Runs to `cfg.t_final`; divergence is an error naming the step.
pub fn run(spec: &EquationSpec, grid: &Grid1D, cfg: &TimeConfig) -> Result<Trajectory> {
    let traj = run_with(spec, grid, cfg, |_| true)?;
    if traj.state.status == Status::Diverged {
        return Err(Error::Diverged {
            step: traj.state.n,
            t: traj.state.t,
        });
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Two dimensions

#[derive(Debug, Clone)]
pub struct SimState2D {
    pub u: Field2D,
    pub t: f64,
    pub n: u64,
    pub status: Status,
}

impl SimState2D {
    pub fn initial(spec: &EquationSpec2D, grid: &Grid2D) -> Result<Self> {
        let mut u = Field2D::sample(|x, y| (spec.initial)(x, y), grid)?;
        write_boundary_2d(&mut u, spec, 0.0);
        Ok(Self {
            u,
            t: 0.0,
            n: 0,
            status: Status::Running,
        })
    }
}

fn boundary_lines(n: usize) -> [usize; 4] {
    [0, 1, n - 1, n]
}

fn write_boundary_2d(u: &mut Field2D, spec: &EquationSpec2D, t: f64) {
    let g = u.grid;
    let (nx, ny) = (g.gx.n(), g.gy.n());
    for i in boundary_lines(nx) {
        let x = g.gx.node(i);
        for j in 0..=ny {
            u.set(i, j, spec.boundary_value(x, g.gy.node(j), t));
        }
    }
    for i in 2..nx - 1 {
        let x = g.gx.node(i);
        for j in boundary_lines(ny) {
            u.set(i, j, spec.boundary_value(x, g.gy.node(j), t));
        }
    }
}

/// Exact solver for `U - delta (Lx U + U Ly^T) = F` on the unknown block,
/// where `Lx`, `Ly` are the Dirichlet second-derivative matrices.
#[derive(Debug, Clone)]
pub enum MassSolver2D {
    /// Diagonalises `Ly`; one banded solve per y-mode.
    Eigen(EigenSolver),
    /// Restarted GMRES on the Kronecker-structured operator.
    Iterative(IterativeSolver),
}

#[derive(Debug, Clone)]
pub struct EigenSolver {
    v_t: DMatrix<f64>,
    vinv_t: DMatrix<f64>,
    h2a2x: BandedMatrix,
    modes: Vec<BandedLu>,
}

#[derive(Debug, Clone)]
pub struct IterativeSolver {
    delta: f64,
    tol: f64,
    max_iter: usize,
    restart: usize,
}

/// Tolerance used to decide the spectrum of `Ly` is real.
const REAL_SPECTRUM_TOL: f64 = 1e-8;

impl EigenSolver {
    pub fn new(d2x: &DerivativeOperator, d2y: &DerivativeOperator, delta: f64) -> Result<Self> {
        let ly = d2y.differentiation_matrix()?;
        let my = ly.nrows();
        let scale = ly.amax().max(1.0);
        let (q, t) = ly
            .clone()
            .try_schur(1e-14, 10_000)
            .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?
            .unpack();
        for k in 0..my - 1 {
            if t[(k + 1, k)].abs() > REAL_SPECTRUM_TOL * scale {
                return Err(Error::Eigen(format!(
                    "complex eigenvalue pair at {k} (subdiagonal {:e})",
                    t[(k + 1, k)]
                )));
            }
        }
        let lambda: Vec<f64> = (0..my).map(|k| t[(k, k)]).collect();
        // Eigenvectors of the triangular factor by back substitution.
        let mut y = DMatrix::<f64>::zeros(my, my);
        for k in 0..my {
            y[(k, k)] = 1.0;
            for i in (0..k).rev() {
                let s: f64 = (i + 1..=k).map(|l| t[(i, l)] * y[(l, k)]).sum();
                let mut d = t[(i, i)] - lambda[k];
                if d.abs() < f64::EPSILON * scale {
                    d = f64::EPSILON * scale;
                }
                y[(i, k)] = -s / d;
            }
            let norm = y.column(k).norm();
            y.column_mut(k).unscale_mut(norm);
        }
        let v = q * y;
        let vinv = v
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Eigen("eigenvector matrix is singular".into()))?;
        let resid = (&ly * &v - &v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()))).amax();
        if !(resid <= 1e-8 * scale) {
            return Err(Error::Eigen(format!("eigen residual {resid:e} too large")));
        }

        let hx2 = d2x.grid().h().powi(2);
        let h2a2x = d2x.lhs().combine(hx2, d2x.lhs(), 0.0)?;
        let modes = lambda
            .iter()
            .map(|&mu| h2a2x.combine(1.0 - delta * mu, d2x.rhs(), -delta)?.factor())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            v_t: v.transpose(),
            vinv_t: vinv.transpose(),
            h2a2x,
            modes,
        })
    }

    fn solve(&self, f: &DMatrix<f64>, tmp: &mut Vec<f64>) -> DMatrix<f64> {
        let mut ft = f * &self.vinv_t;
        let mx = ft.nrows();
        tmp.resize(mx, 0.0);
        for (j, lu) in self.modes.iter().enumerate() {
            let mut col = ft.column_mut(j);
            let col = col.as_mut_slice();
            self.h2a2x.matvec_into(col, tmp);
            lu.solve_in_place(tmp);
            col.copy_from_slice(tmp);
        }
        ft *= &self.v_t;
        ft
    }
}

impl IterativeSolver {
    /// `out = u - delta (Lx u + u Ly^T)` with `u` column-major `mx x my`.
    fn apply(&self, d2x: &DerivativeOperator, d2y: &DerivativeOperator, u: &[f64], out: &mut [f64], scratch: &mut Scratch2D) {
        let (mx, my) = (d2x.dim(), d2y.dim());
        // Along y the column-major block is already line-interleaved.
        d2y.apply_lines(u, &scratch.zero_x, &mut scratch.ly);
        transpose_into(u, mx, my, &mut scratch.xt);
        d2x.apply_lines(&scratch.xt, &scratch.zero_y, &mut scratch.lx);
        for b in 0..my {
            for a in 0..mx {
                let k = a + b * mx;
                out[k] = u[k] - self.delta * (scratch.lx[a * my + b] + scratch.ly[k]);
            }
        }
    }

    fn solve(
        &self,
        d2x: &DerivativeOperator,
        d2y: &DerivativeOperator,
        f: &DMatrix<f64>,
        scratch: &mut Scratch2D,
    ) -> Result<DMatrix<f64>> {
        let rhs = f.as_slice();
        let n = rhs.len();
        let bnorm = norm2(rhs);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(DMatrix::from_vec(f.nrows(), f.ncols(), x));
        }
        let m = self.restart;
        let mut iters = 0;
        let mut r = vec![0.0; n];
        let mut ax = vec![0.0; n];
        let mut resid;
        loop {
            self.apply(d2x, d2y, &x, &mut ax, scratch);
            for k in 0..n {
                r[k] = rhs[k] - ax[k];
            }
            let beta = norm2(&r);
            resid = beta / bnorm;
            if resid <= self.tol {
                break;
            }
            if iters >= self.max_iter {
                return Err(Error::NoConvergence {
                    iterations: iters,
                    residual: resid,
                });
            }
            let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
            let mut hess = vec![vec![0.0; m]; m + 1];
            let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
            let mut g = vec![0.0; m + 1];
            g[0] = beta;
            let mut used = 0;
            for j in 0..m {
                let mut w = vec![0.0; n];
                self.apply(d2x, d2y, &basis[j], &mut w, scratch);
                for (i, vi) in basis.iter().enumerate() {
                    let hij = dot(&w, vi);
                    hess[i][j] = hij;
                    for k in 0..n {
                        w[k] -= hij * vi[k];
                    }
                }
                let hn = norm2(&w);
                hess[j + 1][j] = hn;
                for i in 0..j {
                    let tmp = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                    hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                    hess[i][j] = tmp;
                }
                let denom = hess[j][j].hypot(hess[j + 1][j]);
                cs[j] = hess[j][j] / denom;
                sn[j] = hess[j + 1][j] / denom;
                hess[j][j] = denom;
                hess[j + 1][j] = 0.0;
                g[j + 1] = -sn[j] * g[j];
                g[j] *= cs[j];
                used = j + 1;
                iters += 1;
                if (g[j + 1].abs() / bnorm) <= self.tol || hn == 0.0 || iters >= self.max_iter {
                    break;
                }
                basis.push(w.iter().map(|v| v / hn).collect());
            }
            let mut yv = vec![0.0; used];
            for i in (0..used).rev() {
                let s: f64 = (i + 1..used).map(|k| hess[i][k] * yv[k]).sum();
                yv[i] = (g[i] - s) / hess[i][i];
            }
            for (k, vk) in basis.iter().take(used).enumerate() {
                for (xi, vi) in x.iter_mut().zip(vk) {
                    *xi += yv[k] * vi;
                }
            }
        }
        Ok(DMatrix::from_vec(f.nrows(), f.ncols(), x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Column-major `rows x cols` into row-major order.
fn transpose_into(src: &[f64], rows: usize, cols: usize, dst: &mut [f64]) {
    for b in 0..cols {
        for a in 0..rows {
            dst[a * cols + b] = src[a + b * rows];
        }
    }
}

// Block buffers. `x*` buffers are x-line interleaved (index `a * my + b`),
// `y*` buffers are y-line interleaved, i.e. column-major (`a + b * mx`).
#[derive(Debug, Clone)]
struct Scratch2D {
    xt: Vec<f64>,
    lx: Vec<f64>,
    dx: Vec<f64>,
    yt: Vec<f64>,
    ly: Vec<f64>,
    dy: Vec<f64>,
    zeros: Vec<f64>,
    quads_x: Vec<BoundaryQuad>,
    quads_y: Vec<BoundaryQuad>,
    zero_x: Vec<BoundaryQuad>,
    zero_y: Vec<BoundaryQuad>,
    prev_x: Vec<BoundaryQuad>,
    prev_y: Vec<BoundaryQuad>,
    mode: Vec<f64>,
}

impl Scratch2D {
    fn new(mx: usize, my: usize) -> Self {
        let block = vec![0.0; mx * my];
        Self {
            xt: block.clone(),
            lx: block.clone(),
            dx: block.clone(),
            yt: block.clone(),
            ly: block.clone(),
            dy: block.clone(),
            zeros: block,
            quads_x: vec![BoundaryQuad::zero(); my],
            quads_y: vec![BoundaryQuad::zero(); mx],
            zero_x: vec![BoundaryQuad::zero(); mx],
            zero_y: vec![BoundaryQuad::zero(); my],
            prev_x: vec![BoundaryQuad::zero(); my],
            prev_y: vec![BoundaryQuad::zero(); mx],
            mode: vec![0.0; mx],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plan2D {
    pub grid: Grid2D,
    pub d1x: DerivativeOperator,
    pub d2x: DerivativeOperator,
    pub d1y: DerivativeOperator,
    pub d2y: DerivativeOperator,
    pub solver: MassSolver2D,
    delta: f64,
    scratch: Scratch2D,
    // Unknown-block right side: rows are x-unknowns, columns y-unknowns.
    rhs: DMatrix<f64>,
}

impl Plan2D {
    /// Uses the eigen solver, falling back to GMRES if the spectrum is not
    /// numerically real.
    pub fn new(spec: &EquationSpec2D, grid: &Grid2D) -> Result<Self> {
        Self::build(spec, grid, false)
    }

    /// Always uses the iterative solver.
    pub fn new_iterative(spec: &EquationSpec2D, grid: &Grid2D) -> Result<Self> {
        Self::build(spec, grid, true)
    }

    fn build(spec: &EquationSpec2D, grid: &Grid2D, iterative: bool) -> Result<Self> {
        let d1x = build_first_derivative(&grid.gx, Closure::Dirichlet)?;
        let d2x = build_second_derivative(&grid.gx, Closure::Dirichlet)?;
        let d1y = build_first_derivative(&grid.gy, Closure::Dirichlet)?;
        let d2y = build_second_derivative(&grid.gy, Closure::Dirichlet)?;
        let gmres = MassSolver2D::Iterative(IterativeSolver {
            delta: spec.delta,
            tol: 1e-11,
            max_iter: 500,
            restart: 50,
        });
        let solver = if iterative {
            gmres
        } else {
            match EigenSolver::new(&d2x, &d2y, spec.delta) {
                Ok(e) => MassSolver2D::Eigen(e),
                Err(Error::Eigen(_)) => gmres,
                Err(e) => return Err(e),
            }
        };
        let (mx, my) = (d2x.dim(), d2y.dim());
        Ok(Self {
            grid: *grid,
            d1x,
            d2x,
            d1y,
            d2y,
            solver,
            delta: spec.delta,
            scratch: Scratch2D::new(mx, my),
            rhs: DMatrix::zeros(mx, my),
        })
    }

    pub fn is_iterative(&self) -> bool {
        matches!(self.solver, MassSolver2D::Iterative(_))
    }

    /// Solves `U - delta (Lx U + U Ly^T) = F` on the unknown block.
    pub fn solve_mass(&mut self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.solver {
            MassSolver2D::Eigen(e) => Ok(e.solve(f, &mut self.scratch.mode)),
            MassSolver2D::Iterative(it) => it.solve(&self.d2x, &self.d2y, f, &mut self.scratch),
        }
    }
}

/// Fills both interleaved copies of the unknown block and the boundary data
/// of every line.
fn gather_lines(u: &Field2D, s: &mut Scratch2D) {
    let (nx, ny) = (u.grid.gx.n(), u.grid.gy.n());
    let (mx, my) = (nx - 3, ny - 3);
    let stride = ny + 1;
    for a in 0..mx {
        let row = &u.values[(a + 2) * stride..(a + 3) * stride];
        s.xt[a * my..(a + 1) * my].copy_from_slice(&row[2..ny - 1]);
        for b in 0..my {
            s.yt[a + b * mx] = row[b + 2];
        }
    }
    gather_quads(u, s);
}

fn gather_quads(u: &Field2D, s: &mut Scratch2D) {
    let (nx, ny) = (u.grid.gx.n(), u.grid.gy.n());
    let stride = ny + 1;
    for (b, q) in s.quads_x.iter_mut().enumerate() {
        *q = BoundaryQuad(boundary_lines(nx).map(|i| u.values[i * stride + b + 2]));
    }
    for (a, q) in s.quads_y.iter_mut().enumerate() {
        let row = &u.values[(a + 2) * stride..(a + 3) * stride];
        *q = BoundaryQuad::from_values(row);
    }
}

/// Advances a 2D state by `tau`.
pub fn step_2d(state: &mut SimState2D, spec: &EquationSpec2D, plan: &mut Plan2D, tau: f64) -> Result<()> {
    if state.status == Status::Diverged {
        return Ok(());
    }
    if state.u.values.len() != plan.grid.len() {
        return Err(Error::DimensionMismatch {
            expected: plan.grid.len(),
            got: state.u.values.len(),
        });
    }
    let (nx, ny) = (plan.grid.gx.n(), plan.grid.gy.n());
    let (mx, my) = (nx - 3, ny - 3);
    let (ax, ay, gamma, delta) = (spec.alpha_x, spec.alpha_y, spec.gamma, plan.delta);
    let s = &mut plan.scratch;

    gather_lines(&state.u, s);
    plan.d2x.apply_lines(&s.xt, &s.quads_x, &mut s.lx);
    plan.d2y.apply_lines(&s.yt, &s.quads_y, &mut s.ly);
    if ax != 0.0 {
        plan.d1x.apply_lines(&s.xt, &s.quads_x, &mut s.dx);
    }
    if ay != 0.0 {
        plan.d1y.apply_lines(&s.yt, &s.quads_y, &mut s.dy);
    }
    // Increment form as in 1D: rhs = tau (gamma lap U - a.grad U), plus the
    // change of the boundary contribution of delta lap below.
    let rhs = plan.rhs.as_mut_slice();
    for b in 0..my {
        for a in 0..mx {
            let (kx, ky) = (a * my + b, a + b * mx);
            let lap = s.lx[kx] + s.ly[ky];
            let mut rate = gamma * lap;
            if ax != 0.0 {
                rate -= ax * s.dx[kx];
            }
            if ay != 0.0 {
                rate -= ay * s.dy[ky];
            }
            rhs[ky] = tau * rate;
        }
    }

    let t_next = state.t + tau;
    let mut next = state.u.clone();
    write_boundary_2d(&mut next, spec, t_next);
    if delta != 0.0 {
        // Boundary contributions of Dxx + Dyy are linear in the boundary
        // values, so their change is the contribution of the difference.
        s.prev_x.copy_from_slice(&s.quads_x);
        s.prev_y.copy_from_slice(&s.quads_y);
        gather_quads(&next, s);
        for (q, p) in s.quads_x.iter_mut().zip(&s.prev_x).chain(s.quads_y.iter_mut().zip(&s.prev_y)) {
            for k in 0..4 {
                q.0[k] -= p.0[k];
            }
        }
        plan.d2x.apply_lines(&s.zeros, &s.quads_x, &mut s.lx);
        plan.d2y.apply_lines(&s.zeros, &s.quads_y, &mut s.ly);
        for b in 0..my {
            for a in 0..mx {
                rhs[a + b * mx] += delta * (s.lx[a * my + b] + s.ly[a + b * mx]);
            }
        }
    }
    let rhs = std::mem::replace(&mut plan.rhs, DMatrix::zeros(0, 0));
    let solved = plan.solve_mass(&rhs);
    plan.rhs = rhs;
    let solved = solved?;
    for b in 0..my {
        for a in 0..mx {
            next.set(a + 2, b + 2, plan.scratch.yt[a + b * mx] + solved[(a, b)]);
        }
    }
    state.u = next;
    state.n += 1;
    state.t = t_next;
    if diverged(&state.u.values) {
        state.status = Status::Diverged;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Trajectory2D {
    pub tau: f64,
    pub samples: Vec<Sample<Field2D>>,
    pub state: SimState2D,
    pub iterative: bool,
}

/// 2D run; the `H6` rule takes `h` from the x spacing.
pub fn run_2d(spec: &EquationSpec2D, grid: &Grid2D, cfg: &TimeConfig) -> Result<Trajectory2D> {
    let tau = cfg.tau.resolve(grid.gx.h());
    let times = validate_time(cfg, tau)?;
    let mut plan = Plan2D::new(spec, grid)?;
    let iterative = plan.is_iterative();
    let state = std::cell::RefCell::new(SimState2D::initial(spec, grid)?);
    let mut samples = Vec::with_capacity(times.len());
    drive(
        cfg.t_final,
        tau,
        &times,
        |size, last| {
            let mut st = state.borrow_mut();
            step_2d(&mut st, spec, &mut plan, size)?;
            if size == tau {
                st.t = st.n as f64 * tau;
            }
            if last {
                st.t = cfg.t_final;
            }
            Ok(st.status != Status::Diverged)
        },
        |requested| {
            let st = state.borrow();
            samples.push(Sample {
                requested,
                t: st.t,
                field: st.u.clone(),
            });
        },
    )?;
    let mut state = state.into_inner();
    if state.status == Status::Diverged {
        return Err(Error::Diverged {
            step: state.n,
            t: state.t,
        });
    }
    state.status = Status::Finished;
    Ok(Trajectory2D {
        tau,
        samples,
        state,
        iterative,
    })
}
