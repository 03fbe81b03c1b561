//! Von Neumann analysis of the scheme applied to the linear model
//! `u_t + alpha u_x - gamma u_xx - delta u_xxt = 0`.
//!
//! A Fourier mode `exp(i j theta)` is scaled by `i Q(theta) / (6h)` under the
//! compact first derivative and by `P(theta) / (2h^2)` under the second.

use num_complex::Complex64;

use crate::grid::Field1D;
use crate::models::EquationSpec;
use crate::operators::{first_derivative_all_nodes, DerivativeOperator};
use crate::Result;

/// `(48 cos t + 3 cos 2t - 51) / (11 + 4 cos t)`, in `[-96/7, 0]`.
pub fn symbol_p(theta: f64) -> f64 {
    let c = theta.cos();
    (48.0 * c + 3.0 * (2.0 * theta).cos() - 51.0) / (11.0 + 4.0 * c)
}

/// `(28 sin t + sin 2t) / (3 + 2 cos t)`.
pub fn symbol_q(theta: f64) -> f64 {
    (28.0 * theta.sin() + (2.0 * theta).sin()) / (3.0 + 2.0 * theta.cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolParams {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub h: f64,
    pub tau: f64,
    pub theta: f64,
}

impl SymbolParams {
    pub fn new(alpha: f64, gamma: f64, delta: f64, h: f64) -> Self {
        Self {
            alpha,
            gamma,
            delta,
            h,
            tau: 0.0,
            theta: 0.0,
        }
    }

    pub fn at(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    // (P / 2h^2, Q / 6h)
    fn scaled(&self) -> (f64, f64) {
        (
            symbol_p(self.theta) / (2.0 * self.h * self.h),
            symbol_q(self.theta) / (6.0 * self.h),
        )
    }
}

/// `C(theta) = (gamma P/2h^2 - i alpha Q/6h) / (1 - delta P/2h^2)`.
pub fn semi_discrete_amplification(p: &SymbolParams) -> Complex64 {
    let (ps, qs) = p.scaled();
    Complex64::new(p.gamma * ps, -p.alpha * qs) / (1.0 - p.delta * ps)
}

/// `L(theta) = [(1 + (gamma tau - delta) P/2h^2) - i alpha tau Q/6h] / (1 - delta P/2h^2)`.
pub fn fully_discrete_amplification(p: &SymbolParams) -> Complex64 {
    let (ps, qs) = p.scaled();
    Complex64::new(1.0 + (p.gamma * p.tau - p.delta) * ps, -p.alpha * p.tau * qs) / (1.0 - p.delta * ps)
}

/// Largest admissible step and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableTau {
    pub tau: f64,
    /// Minimising phase; `None` when no phase constrains the step.
    pub theta: Option<f64>,
    /// No positive step satisfies the bound (forward Euler on a purely
    /// advective mode with zero growth allowance).
    pub unconditionally_unstable: bool,
}

/// Number of uniform phase samples in `(0, pi]`.
pub const THETA_SAMPLES: usize = 100_000;

/// Bound on `tau` from `|L|^2 <= 1 + 2 C tau` at one phase.
/// `None` means the phase places no restriction.
fn tau_bound(alpha: f64, gamma: f64, delta: f64, h: f64, growth: f64, theta: f64) -> Option<f64> {
    let p = symbol_p(theta);
    let q = symbol_q(theta);
    if p.abs() < 1e-14 && q.abs() < 1e-14 {
        return None;
    }
    let ps = p / (2.0 * h * h);
    let qs = q / (6.0 * h);
    let d = 1.0 - delta * ps;
    let denom = gamma * gamma * ps * ps + alpha * alpha * qs * qs;
    if denom == 0.0 {
        return None;
    }
    Some((2.0 * d * (growth * d - gamma * ps) / denom).max(0.0))
}

/// Minimises the per-phase bound over `theta in (0, pi]`: a uniform sweep
/// followed by golden-section refinement of the best bracket.
///
/// `growth` is the constant `C >= 0` allowing `|L| <= 1 + C tau`.
pub fn max_stable_tau(alpha: f64, gamma: f64, delta: f64, h: f64, growth: f64) -> StableTau {
    let bound = |theta: f64| tau_bound(alpha, gamma, delta, h, growth, theta).unwrap_or(f64::INFINITY);
    let step = std::f64::consts::PI / THETA_SAMPLES as f64;
    let (mut best_k, mut best) = (0usize, f64::INFINITY);
    for k in 1..=THETA_SAMPLES {
        let v = bound(k as f64 * step);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    if best.is_infinite() {
        return StableTau {
            tau: f64::INFINITY,
            theta: None,
            unconditionally_unstable: false,
        };
    }
    let (mut lo, mut hi) = (
        (best_k as f64 - 1.0).max(0.5) * step,
        ((best_k + 1) as f64 * step).min(std::f64::consts::PI),
    );
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (bound(x1), bound(x2));
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = bound(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = bound(x2);
        }
    }
    let mut theta = best_k as f64 * step;
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < best {
            best = f;
            theta = x;
        }
    }
    StableTau {
        tau: best,
        theta: Some(theta),
        unconditionally_unstable: best == 0.0,
    }
}

/// Right side of `||u(t)|| <= exp(Re C(theta) t) ||u0||`.
pub fn decay_envelope(p: &SymbolParams, t: f64, u0_norm: f64) -> f64 {
    (semi_discrete_amplification(p).re * t).exp() * u0_norm
}

/// Coefficients of the equation linearised about a state `u`:
/// `v_t + f'(u) v_x - gamma v_xx - delta v_xxt + f''(u) u_x v = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenCoefficients {
    /// `f'(u_j)` at every node.
    pub alpha_loc: Vec<f64>,
    /// `f''(u_j) (u_x)_j` at every node.
    pub zeroth_order: Vec<f64>,
}

impl FrozenCoefficients {
    pub fn max_alpha(&self) -> f64 {
        self.alpha_loc.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// `op1` must be the Dirichlet first-derivative operator of `u`'s grid; the
/// known nodes are read from `u` itself.
pub fn linearize_about(u: &Field1D, spec: &EquationSpec, op1: &DerivativeOperator) -> Result<FrozenCoefficients> {
    let ux = first_derivative_all_nodes(op1, &u.values)?;
    let alpha_loc = u.values.iter().map(|&v| spec.flux.derivative(v)).collect();
    let zeroth_order = u
        .values
        .iter()
        .zip(&ux)
        .map(|(&v, &d)| spec.flux.second_derivative(v) * d)
        .collect();
    Ok(FrozenCoefficients {
        alpha_loc,
        zeroth_order,
    })
}

/// Conservative step bound for a nonlinear state: the linear bound with
/// `alpha = max_j |f'(u_j)|`.
pub fn frozen_stable_tau(
    u: &Field1D,
    spec: &EquationSpec,
    op1: &DerivativeOperator,
    growth: f64,
) -> Result<StableTau> {
    let frozen = linearize_about(u, spec, op1)?;
    Ok(max_stable_tau(frozen.max_alpha(), spec.gamma, spec.delta, u.grid.h(), growth))
}
