//! Error norms, observed orders, quadrature of the conserved integrals and
//! bore metrics.

use crate::grid::{Field1D, Field2D};
use crate::operators::{first_derivative_all_nodes, DerivativeOperator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub linf: f64,
    pub l1: f64,
    pub l2: f64,
    pub rate_linf: Option<f64>,
    pub rate_l1: Option<f64>,
    pub rate_l2: Option<f64>,
}

impl ErrorReport {
    /// Fills the rates against a coarser companion whose resolution
    /// parameter was `ratio` times larger (2 for a grid doubling, 10 per
    /// time-step decade).
    pub fn with_rates(mut self, coarser: &ErrorReport, ratio: f64) -> Self {
        self.rate_linf = Some(observed_order_ratio(coarser.linf, self.linf, ratio));
        self.rate_l1 = Some(observed_order_ratio(coarser.l1, self.l1, ratio));
        self.rate_l2 = Some(observed_order_ratio(coarser.l2, self.l2, ratio));
        self
    }
}

/// Norms of a pointwise error with weight `w` per node. The grid routines
/// pass the cell size divided by the domain measure, so `l1` and `l2` are
/// mean values over the domain and comparable across domains.
pub fn norms_of(errors: impl Iterator<Item = f64>, w: f64) -> ErrorReport {
    let (mut linf, mut s1, mut s2) = (0.0f64, 0.0, 0.0);
    for e in errors {
        let a = e.abs();
        linf = linf.max(a);
        s1 += a;
        s2 += a * a;
    }
    ErrorReport {
        linf,
        l1: w * s1,
        l2: (w * s2).sqrt(),
        ..Default::default()
    }
}

/// `linf = max|e|`, `l1 = (h / L) sum|e|`, `l2 = sqrt((h / L) sum e^2)` over
/// all nodes, with `L = b - a`.
pub fn error_norms(numeric: &Field1D, exact: &Field1D, h: f64) -> Result<ErrorReport> {
    if numeric.values.len() != exact.values.len() {
        return Err(Error::DimensionMismatch {
            expected: numeric.values.len(),
            got: exact.values.len(),
        });
    }
    let len = numeric.grid.b() - numeric.grid.a();
    Ok(norms_of(
        numeric.values.iter().zip(&exact.values).map(|(a, b)| a - b),
        h / len,
    ))
}

pub fn error_norms_2d(numeric: &Field2D, exact: &Field2D) -> Result<ErrorReport> {
    if numeric.values.len() != exact.values.len() {
        return Err(Error::DimensionMismatch {
            expected: numeric.values.len(),
            got: exact.values.len(),
        });
    }
    let (gx, gy) = (&numeric.grid.gx, &numeric.grid.gy);
    let w = (gx.h() / (gx.b() - gx.a())) * (gy.h() / (gy.b() - gy.a()));
    Ok(norms_of(
        numeric.values.iter().zip(&exact.values).map(|(a, b)| a - b),
        w,
    ))
}

/// `log2(e_coarse / e_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> f64 {
    observed_order_ratio(e_coarse, e_fine, 2.0)
}

/// `ln(e_coarse / e_fine) / ln(ratio)`.
pub fn observed_order_ratio(e_coarse: f64, e_fine: f64, ratio: f64) -> f64 {
    (e_coarse / e_fine).ln() / ratio.ln()
}

/// Composite Simpson rule. With an odd number of intervals the last three
/// are integrated with the 3/8 rule.
pub fn simpson(values: &[f64], h: f64) -> Result<f64> {
    let len = values.len();
    if len < 3 {
        return Err(Error::InvalidParameter(format!(
            "Simpson's rule needs at least 3 nodes, got {len}"
        )));
    }
    let intervals = len - 1;
    let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    let mut sum = 0.0;
    if simpson_end > 0 {
        let mut s = values[0] + values[simpson_end];
        for (k, v) in values.iter().enumerate().take(simpson_end).skip(1) {
            s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        sum += s * h / 3.0;
    }
    if simpson_end < intervals {
        let v = &values[simpson_end..];
        sum += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub t: f64,
    pub values: [f64; 3],
    /// Percentage errors against analytic values, when known.
    pub pct_err: Option<[f64; 3]>,
}

impl InvariantReport {
    pub fn with_reference(mut self, exact: [f64; 3]) -> Self {
        self.pct_err = Some([0, 1, 2].map(|k| percent_error(self.values[k], exact[k])));
        self
    }
}

/// `100 |numeric - exact| / |exact|`.
pub fn percent_error(numeric: f64, exact: f64) -> f64 {
    100.0 * (numeric - exact).abs() / exact.abs()
}

/// `I1 = int u`, `I2 = int (u^2 + delta u_x^2)`, `I3 = int u^3`, with `u_x`
/// from the compact operator (one-sided stencils on the four known nodes).
pub fn invariants(u: &Field1D, delta: f64, op1: &DerivativeOperator, t: f64) -> Result<InvariantReport> {
    let h = u.grid.h();
    let ux = first_derivative_all_nodes(op1, &u.values)?;
    let i1 = simpson(&u.values, h)?;
    let sq: Vec<f64> = u.values.iter().zip(&ux).map(|(v, d)| v * v + delta * d * d).collect();
    let cube: Vec<f64> = u.values.iter().map(|v| v * v * v).collect();
    Ok(InvariantReport {
        t,
        values: [i1, simpson(&sq, h)?, simpson(&cube, h)?],
        pct_err: None,
    })
}

/// Least-squares slopes of `I1..I3` against time.
pub fn bore_rates(samples: &[(f64, [f64; 3])]) -> Result<[f64; 3]> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("bore rates need at least two samples".into()));
    }
    let n = samples.len() as f64;
    let tm = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let stt: f64 = samples.iter().map(|s| (s.0 - tm).powi(2)).sum();
    if !(stt > 0.0) {
        return Err(Error::InvalidParameter("bore rate samples span no time".into()));
    }
    Ok([0, 1, 2].map(|k| {
        let ym = samples.iter().map(|s| s.1[k]).sum::<f64>() / n;
        samples.iter().map(|s| (s.0 - tm) * (s.1[k] - ym)).sum::<f64>() / stt
    }))
}

/// Position and value of the largest `u`; ties go to the larger `x`.
pub fn leading_undulation(u: &Field1D) -> (f64, f64) {
    let (mut jbest, mut best) = (0, f64::NEG_INFINITY);
    for (j, &v) in u.values.iter().enumerate() {
        if v >= best {
            best = v;
            jbest = j;
        }
    }
    (u.grid.node(jbest), best)
}
