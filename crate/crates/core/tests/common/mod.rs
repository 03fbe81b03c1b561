//! Dense reference implementations shared by the integration tests.

#![allow(dead_code)]

use compact6::operators::{build_first_derivative, build_second_derivative};
use compact6::stepper::{step_1d, SteppingPlan, Workspace};
use compact6::{Closure, EquationSpec, Grid1D, Grid2D, SimState};
use nalgebra::{DMatrix, DVector};

/// One step of the scheme written out densely:
/// `(I - delta D2)(u^{n+1} - u^n) = tau (-f'(u) D1 u + gamma D2 u + g)`,
/// where `D2 v` carries the boundary data of the level it acts on.
pub fn dense_step(spec: &EquationSpec, g: &Grid1D, u: &[f64], t: f64, tau: f64) -> Vec<f64> {
    let n = g.n();
    let d1 = build_first_derivative(g, Closure::Dirichlet).unwrap();
    let d2 = build_second_derivative(g, Closure::Dirichlet).unwrap();
    let m = d1.dim();
    let a1inv = d1.lhs().to_dense().try_inverse().unwrap();
    let a2inv = d2.lhs().to_dense().try_inverse().unwrap();
    let (b1, b2) = (d1.rhs().to_dense(), d2.rhs().to_dense());
    let q0 = spec.boundary_quad(g, t).unwrap();
    let q1 = spec.boundary_quad(g, t + tau).unwrap();
    let inner = DVector::from_row_slice(&u[2..n - 1]);
    let h = g.h();
    let apply1 = |v: &DVector<f64>, c: Vec<f64>| &a1inv * (&b1 * v + DVector::from_vec(c)) / h;
    let apply2 = |v: &DVector<f64>, c: Vec<f64>| &a2inv * (&b2 * v + DVector::from_vec(c)) / (h * h);
    let ux = apply1(&inner, d1.correction(&q0));
    let uxx = apply2(&inner, d2.correction(&q0));
    let rate = DVector::from_fn(m, |k, _| {
        let x = g.node(k + 2);
        -spec.flux.derivative(inner[k]) * ux[k] + spec.gamma * uxx[k] + spec.forcing_at(x, t)
    });
    // u^{n+1} - delta D2(u^{n+1}, q1) = u^n - delta D2(u^n, q0) + tau rate
    let lhs = DMatrix::identity(m, m) - &a2inv * &b2 * (spec.delta / (h * h));
    let known = &a2inv * DVector::from_vec(d2.correction(&q1)) * (spec.delta / (h * h));
    let rhs = &inner - uxx * spec.delta + rate * tau + known;
    let next = lhs.lu().solve(&rhs).unwrap();
    let mut out = u.to_vec();
    out[2..n - 1].copy_from_slice(next.as_slice());
    out[0] = q1.0[0];
    out[1] = q1.0[1];
    out[n - 1] = q1.0[2];
    out[n] = q1.0[3];
    out
}

/// Largest relative difference between banded and dense stepping over
/// `steps` steps.
pub fn compare_with_dense(spec: &EquationSpec, g: &Grid1D, tau: f64, steps: usize) -> f64 {
    let plan = SteppingPlan::new(spec, g, tau).unwrap();
    let mut ws = Workspace::new(g);
    let mut state = SimState::initial(spec, g).unwrap();
    let mut oracle = state.u.values.clone();
    let mut worst = 0.0f64;
    for k in 0..steps {
        let t = k as f64 * tau;
        oracle = dense_step(spec, g, &oracle, t, tau);
        step_1d(&mut state, spec, &plan, &mut ws, tau).unwrap();
        let scale = oracle.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-30);
        for (a, b) in state.u.values.iter().zip(&oracle) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    worst
}

/// `I - delta (kron(I_my, Dx) + kron(Dy, I_mx))` on the column-major
/// unknown block.
pub fn kronecker_mass(grid: &Grid2D, delta: f64) -> DMatrix<f64> {
    let dx = build_second_derivative(&grid.gx, Closure::Dirichlet).unwrap().differentiation_matrix().unwrap();
    let dy = build_second_derivative(&grid.gy, Closure::Dirichlet).unwrap().differentiation_matrix().unwrap();
    let (mx, my) = (dx.nrows(), dy.nrows());
    let ix = DMatrix::<f64>::identity(mx, mx);
    let iy = DMatrix::<f64>::identity(my, my);
    DMatrix::identity(mx * my, mx * my) - (iy.kronecker(&dx) + dy.kronecker(&ix)) * delta
}
