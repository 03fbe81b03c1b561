//! Equation catalogue: fluxes, coefficients, forcing, initial/boundary data
//! and exact solutions for
//!
//! ```text
//! u_t + f(u)_x - gamma u_xx - delta u_xxt = g(x, t)
//! ```

use std::fmt;
use std::sync::Arc;

use crate::grid::Grid1D;
use crate::operators::BoundaryQuad;
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type PlaneTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flux {
    /// `f(u) = alpha u`
    Linear { alpha: f64 },
    /// `f(u) = u^2 / 2` (Equal Width)
    HalfSquare,
    /// `f(u) = u + u^2 / 2` (BBM-Burgers)
    BbmBurgers,
}

impl Flux {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Flux::Linear { alpha } => alpha * u,
            Flux::HalfSquare => 0.5 * u * u,
            Flux::BbmBurgers => u + 0.5 * u * u,
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Flux::Linear { alpha } => alpha,
            Flux::HalfSquare => u,
            Flux::BbmBurgers => 1.0 + u,
        }
    }

    #[inline]
    pub fn second_derivative(&self, _u: f64) -> f64 {
        match *self {
            Flux::Linear { .. } => 0.0,
            Flux::HalfSquare | Flux::BbmBurgers => 1.0,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Flux::Linear { .. })
    }
}

/// How the four known nodes `0, 1, N-1, N` are filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryData {
    /// From the exact solution at the current time.
    Exact,
    /// Nodes `0, 1` take `left`, nodes `N-1, N` take `right`.
    Constant { left: f64, right: f64 },
}

#[derive(Clone)]
pub struct EquationSpec {
    pub name: String,
    pub flux: Flux,
    pub gamma: f64,
    pub delta: f64,
    pub forcing: Option<SpaceTimeFn>,
    pub initial: ScalarFn,
    pub exact: Option<SpaceTimeFn>,
    pub boundary: BoundaryData,
}

impl fmt::Debug for EquationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquationSpec")
            .field("name", &self.name)
            .field("flux", &self.flux)
            .field("gamma", &self.gamma)
            .field("delta", &self.delta)
            .field("forcing", &self.forcing.is_some())
            .field("exact", &self.exact.is_some())
            .field("boundary", &self.boundary)
            .finish()
    }
}

impl EquationSpec {
    pub fn with_initial(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(f);
        self
    }

    /// Sets the exact solution and switches boundary data to it.
    pub fn with_exact(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(f));
        self.boundary = BoundaryData::Exact;
        self
    }

    pub fn with_forcing(mut self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(g));
        self
    }

    pub fn with_boundary(mut self, b: BoundaryData) -> Self {
        self.boundary = b;
        self
    }

    /// Advection speed of a linear flux.
    pub fn alpha(&self) -> Option<f64> {
        match self.flux {
            Flux::Linear { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn exact_at(&self, x: f64, t: f64) -> Option<f64> {
        self.exact.as_ref().map(|f| f(x, t))
    }

    #[inline]
    pub fn forcing_at(&self, x: f64, t: f64) -> f64 {
        self.forcing.as_ref().map_or(0.0, |g| g(x, t))
    }

    /// Known values at nodes `0, 1, N-1, N` at time `t`.
    pub fn boundary_quad(&self, grid: &Grid1D, t: f64) -> Result<BoundaryQuad> {
        let q = match self.boundary {
            BoundaryData::Constant { left, right } => BoundaryQuad::constant(left, right),
            BoundaryData::Exact => {
                let exact = self.exact.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "{}: exact boundary data requested but no exact solution is set",
                        self.name
                    ))
                })?;
                BoundaryQuad::from_fn(grid, |x| exact(x, t))
            }
        };
        if !q.is_finite() {
            let value = q.0.iter().copied().find(|v| !v.is_finite()).unwrap_or(f64::NAN);
            return Err(Error::NonFinite { x: grid.a(), value });
        }
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        for (label, v) in [("gamma", self.gamma), ("delta", self.delta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{label} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn base(name: &str, flux: Flux, gamma: f64, delta: f64) -> EquationSpec {
    EquationSpec {
        name: name.to_string(),
        flux,
        gamma,
        delta,
        forcing: None,
        initial: Arc::new(|_| 0.0),
        exact: None,
        boundary: BoundaryData::Constant {
            left: 0.0,
            right: 0.0,
        },
    }
}

/// `u_t + alpha u_x - gamma u_xx - delta u_xxt = 0` with zero data; attach
/// data with the builder methods or use [`linear_sobolev_sine`].
pub fn linear_sobolev(alpha: f64, gamma: f64, delta: f64) -> Result<EquationSpec> {
    let spec = base("linear_sobolev", Flux::Linear { alpha }, gamma, delta);
    spec.validate()?;
    Ok(spec)
}

/// Linear Sobolev equation started from `sin x`, with its exact solution
/// `exp(-gamma t / (1 + delta)) sin(x - alpha t / (1 + delta))`.
pub fn linear_sobolev_sine(alpha: f64, gamma: f64, delta: f64) -> Result<EquationSpec> {
    let decay = gamma / (1.0 + delta);
    let speed = alpha / (1.0 + delta);
    Ok(linear_sobolev(alpha, gamma, delta)?
        .with_initial(f64::sin)
        .with_exact(move |x, t| (-decay * t).exp() * (x - speed * t).sin()))
}

/// Equal Width equation `u_t + u u_x = delta u_xxt`.
pub fn ew_equation(delta: f64) -> Result<EquationSpec> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the Equal Width equation needs delta > 0, got {delta}"
        )));
    }
    Ok(base("ew", Flux::HalfSquare, 0.0, delta))
}

/// BBM-Burgers `u_t + (1 + u) u_x - gamma u_xx - delta u_xxt = g`.
pub fn bbmb_equation(gamma: f64, delta: f64, forcing: Option<SpaceTimeFn>) -> Result<EquationSpec> {
    let mut spec = base("bbmb", Flux::BbmBurgers, gamma, delta);
    spec.validate()?;
    spec.forcing = forcing;
    Ok(spec)
}

/// Forcing that makes `sech(x - t)` an exact solution for `gamma = delta = 1`.
pub fn bbmb_sech_forcing(x: f64, t: f64) -> f64 {
    let s = x - t;
    let th = s.tanh();
    let sech = 1.0 / s.cosh();
    (1.0 - 6.0 * th.powi(3) - 2.0 * th * th - (sech - 5.0) * th) * sech
}

/// BBM-Burgers with `gamma = delta = 1`, the sech forcing, and exact
/// solution `sech(x - t)`.
pub fn bbmb_sech() -> EquationSpec {
    bbmb_equation(1.0, 1.0, Some(Arc::new(bbmb_sech_forcing)))
        .expect("valid coefficients")
        .with_initial(|x| 1.0 / x.cosh())
        .with_exact(|x, t| 1.0 / (x - t).cosh())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitaryWaveParams {
    pub c: f64,
    pub k: f64,
    pub x0: f64,
    pub delta: f64,
}

impl SolitaryWaveParams {
    /// Width fixed by the equation: `k = sqrt(1 / (4 delta))`.
    pub fn new(c: f64, x0: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            c,
            k: (1.0 / (4.0 * delta)).sqrt(),
            x0,
            delta,
        })
    }
}

#[inline]
fn sech2(z: f64) -> f64 {
    let s = 1.0 / z.cosh();
    s * s
}

/// `3c sech^2(k (x - x0 - c t))` as initial profile and exact solution.
pub fn solitary_wave(p: &SolitaryWaveParams) -> (ScalarFn, SpaceTimeFn) {
    let SolitaryWaveParams { c, k, x0, .. } = *p;
    let ic: ScalarFn = Arc::new(move |x| 3.0 * c * sech2(k * (x - x0)));
    let exact: SpaceTimeFn = Arc::new(move |x, t| 3.0 * c * sech2(k * (x - x0 - c * t)));
    (ic, exact)
}

/// EW equation carrying one solitary wave, boundary data from the exact
/// solution.
pub fn ew_solitary(p: &SolitaryWaveParams) -> Result<EquationSpec> {
    let (ic, exact) = solitary_wave(p);
    let mut spec = ew_equation(p.delta)?;
    spec.name = "ew_solitary".into();
    spec.initial = ic;
    spec.exact = Some(exact);
    spec.boundary = BoundaryData::Exact;
    Ok(spec)
}

/// One wave of a superposition: speed `c`, width `k`, centre `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub c: f64,
    pub k: f64,
    pub x: f64,
}

/// `3 sum_j c_j sech^2(k_j (x - x_j))`.
pub fn multi_soliton_ic(waves: &[Wave]) -> ScalarFn {
    let waves = waves.to_vec();
    Arc::new(move |x| waves.iter().map(|w| 3.0 * w.c * sech2(w.k * (x - w.x))).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoreParams {
    pub u0: f64,
    pub d: f64,
    pub xc: f64,
}

impl BoreParams {
    pub fn new(u0: f64, d: f64, xc: f64) -> Result<Self> {
        if !(u0 > 0.0 && d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bore needs u0 > 0 and d > 0, got u0 = {u0}, d = {d}"
            )));
        }
        Ok(Self { u0, d, xc })
    }
}

/// `u0 / 2 (1 - tanh((x - xc) / d))`.
pub fn bore_ic(p: &BoreParams) -> ScalarFn {
    let BoreParams { u0, d, xc } = *p;
    Arc::new(move |x| 0.5 * u0 * (1.0 - ((x - xc) / d).tanh()))
}

/// EW undular bore: `u0` held on the left, zero on the right.
pub fn ew_bore(p: &BoreParams, delta: f64) -> Result<EquationSpec> {
    let mut spec = ew_equation(delta)?;
    spec.name = "ew_bore".into();
    spec.initial = bore_ic(p);
    spec.boundary = BoundaryData::Constant {
        left: p.u0,
        right: 0.0,
    };
    Ok(spec)
}

/// `(6c/k, 12c^2/k + 48 k c^2 delta / 5, 144 c^3 / (5k))`.
pub fn analytic_invariants_solitary(p: &SolitaryWaveParams) -> [f64; 3] {
    analytic_invariants_waves(&[Wave { c: p.c, k: p.k, x: p.x0 }], p.delta)
}

/// Sum of the single-wave invariants over well-separated waves.
pub fn analytic_invariants_waves(waves: &[Wave], delta: f64) -> [f64; 3] {
    waves.iter().fold([0.0; 3], |acc, w| {
        let (c, k) = (w.c, w.k);
        if c == 0.0 {
            return acc;
        }
        [
            acc[0] + 6.0 * c / k,
            acc[1] + 12.0 * c * c / k + 48.0 * k * c * c * delta / 5.0,
            acc[2] + 144.0 * c.powi(3) / (5.0 * k),
        ]
    })
}

/// Growth rates `(u0^2/2, 2 u0^3/3, 3 u0^4/4)` of the bore integrals.
pub fn analytic_bore_rates(u0: f64) -> [f64; 3] {
    [0.5 * u0 * u0, 2.0 * u0.powi(3) / 3.0, 0.75 * u0.powi(4)]
}

/// Two-dimensional linear Sobolev equation
/// `u_t + ax u_x + ay u_y - gamma (u_xx + u_yy) - delta (u_xxt + u_yyt) = 0`.
#[derive(Clone)]
pub struct EquationSpec2D {
    pub name: String,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub gamma: f64,
    pub delta: f64,
    pub initial: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub exact: Option<PlaneTimeFn>,
}

impl fmt::Debug for EquationSpec2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquationSpec2D")
            .field("name", &self.name)
            .field("alpha_x", &self.alpha_x)
            .field("alpha_y", &self.alpha_y)
            .field("gamma", &self.gamma)
            .field("delta", &self.delta)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl EquationSpec2D {
    /// Boundary values come from the exact solution when present, else zero.
    #[inline]
    pub fn boundary_value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.exact.as_ref().map_or(0.0, |f| f(x, y, t))
    }
}

/// 2D linear Sobolev equation started from `sin x sin y`, with exact solution
/// `exp(-2 gamma t / (1 + 2 delta)) / 2 [cos(x - y - (ax - ay) t') - cos(x + y - (ax + ay) t')]`,
/// `t' = t / (1 + 2 delta)`.
pub fn linear_sobolev_2d(alpha_x: f64, alpha_y: f64, gamma: f64, delta: f64) -> Result<EquationSpec2D> {
    for (label, v) in [("gamma", gamma), ("delta", delta)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{label} must be finite and non-negative, got {v}"
            )));
        }
    }
    let denom = 1.0 + 2.0 * delta;
    let decay = 2.0 * gamma / denom;
    let (sm, sp) = ((alpha_x - alpha_y) / denom, (alpha_x + alpha_y) / denom);
    Ok(EquationSpec2D {
        name: "linear_sobolev_2d".into(),
        alpha_x,
        alpha_y,
        gamma,
        delta,
        initial: Arc::new(|x, y| x.sin() * y.sin()),
        exact: Some(Arc::new(move |x, y, t| {
            (-decay * t).exp() * 0.5 * ((x - y - sm * t).cos() - (x + y - sp * t).cos())
        })),
    })
}
