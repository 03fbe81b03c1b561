//! Compact sixth-order first and second derivative operators.
//!
//! An operator is the pair of banded matrices `(A, B)` with
//! `A u' = (B u + C) / h` (first derivative) or `A u'' = (B u + C) / h^2`
//! (second derivative). With the [`Closure::Dirichlet`] closure the unknowns
//! are nodes `2..=N-2`; nodes `0, 1, N-1, N` are known and enter only through
//! the correction vector `C`. The [`Closure::Interior`] variant keeps every
//! node and simply truncates stencils at the ends; it exists for symbol checks
//! and reference computations.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::banded::{dense_inverse, BandedLu, BandedMatrix};
use crate::grid::{Field1D, Grid1D};
use crate::{Error, Result};

pub const FIRST_LHS: [f64; 3] = [1.0 / 3.0, 1.0, 1.0 / 3.0];
pub const FIRST_RHS: [f64; 5] = [-1.0 / 36.0, -7.0 / 9.0, 0.0, 7.0 / 9.0, 1.0 / 36.0];
pub const SECOND_LHS: [f64; 3] = [2.0 / 11.0, 1.0, 2.0 / 11.0];
pub const SECOND_RHS: [f64; 5] = [
    3.0 / 44.0,
    12.0 / 11.0,
    -51.0 / 22.0,
    12.0 / 11.0,
    3.0 / 44.0,
];

/// One-sided row at node 2 over nodes `0..=5`. The right end uses the mirror
/// with flipped sign.
pub const FIRST_BOUNDARY: [f64; 6] = [
    1.0 / 20.0,
    -1.0 / 2.0,
    -1.0 / 3.0,
    1.0,
    -1.0 / 4.0,
    1.0 / 30.0,
];

/// Row at node 2 over nodes `0..=4`; symmetric, so the mirror is identical.
/// This is the classical centred five-point formula (fourth order).
pub const SECOND_BOUNDARY: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    Interior,
    Dirichlet,
}

/// Known values at nodes `0, 1, N-1, N`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryQuad(pub [f64; 4]);

impl BoundaryQuad {
    pub fn new(u0: f64, u1: f64, un1: f64, un: f64) -> Self {
        Self([u0, u1, un1, un])
    }

    pub fn zero() -> Self {
        Self([0.0; 4])
    }

    /// Left pair set to `left`, right pair to `right`.
    pub fn constant(left: f64, right: f64) -> Self {
        Self([left, left, right, right])
    }

    /// Reads the four known nodes from a full nodal vector.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() - 1;
        Self([values[0], values[1], values[n - 1], values[n]])
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let n = grid.n();
        Self([
            f(grid.node(0)),
            f(grid.node(1)),
            f(grid.node(n - 1)),
            f(grid.node(n)),
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct DerivativeOperator {
    order: DerivativeOrder,
    closure: Closure,
    grid: Grid1D,
    lhs: BandedMatrix,
    rhs: BandedMatrix,
    scale: f64,
    lu: BandedLu,
    // (row, weights against the boundary quad)
    corrections: Vec<(usize, [f64; 4])>,
}

pub fn build_first_derivative(grid: &Grid1D, closure: Closure) -> Result<DerivativeOperator> {
    DerivativeOperator::build(grid, DerivativeOrder::First, closure)
}

pub fn build_second_derivative(grid: &Grid1D, closure: Closure) -> Result<DerivativeOperator> {
    DerivativeOperator::build(grid, DerivativeOrder::Second, closure)
}

type Row = Vec<(usize, f64)>;

fn interior_rows(p: usize, n: usize, lhs: &[f64; 3], rhs: &[f64; 5]) -> (Row, Row) {
    let pick = |offsets: std::ops::RangeInclusive<isize>, coefs: &[f64]| -> Row {
        offsets
            .zip(coefs)
            .filter_map(|(o, &c)| {
                let j = p as isize + o;
                (0..=n as isize).contains(&j).then_some((j as usize, c))
            })
            .filter(|&(_, c)| c != 0.0)
            .collect()
    };
    (pick(-1..=1, lhs), pick(-2..=2, rhs))
}

fn bandwidths(rows: &[Row], col_of: impl Fn(usize) -> Option<usize>) -> (usize, usize) {
    let (mut kl, mut ku) = (0, 0);
    for (r, row) in rows.iter().enumerate() {
        for &(node, _) in row {
            if let Some(c) = col_of(node) {
                kl = kl.max(r.saturating_sub(c));
                ku = ku.max(c.saturating_sub(r));
            }
        }
    }
    (kl, ku)
}

impl DerivativeOperator {
    pub fn build(grid: &Grid1D, order: DerivativeOrder, closure: Closure) -> Result<Self> {
        let n = grid.n();
        if n < crate::grid::MIN_INTERVALS {
            return Err(Error::InvalidGrid(format!(
                "{n} intervals is too few for the boundary closures (need at least {})",
                crate::grid::MIN_INTERVALS
            )));
        }
        let (lhs_c, rhs_c) = match order {
            DerivativeOrder::First => (&FIRST_LHS, &FIRST_RHS),
            DerivativeOrder::Second => (&SECOND_LHS, &SECOND_RHS),
        };
        let h = grid.h();
        let scale = match order {
            DerivativeOrder::First => 1.0 / h,
            DerivativeOrder::Second => 1.0 / (h * h),
        };

        let nodes: Range<usize> = match closure {
            Closure::Interior => 0..n + 1,
            Closure::Dirichlet => 2..n - 1,
        };
        let mut lhs_rows: Vec<Row> = Vec::with_capacity(nodes.len());
        let mut rhs_rows: Vec<Row> = Vec::with_capacity(nodes.len());
        for p in nodes.clone() {
            let boundary = closure == Closure::Dirichlet && (p == 2 || p == n - 2);
            if !boundary {
                let (l, r) = interior_rows(p, n, lhs_c, rhs_c);
                lhs_rows.push(l);
                rhs_rows.push(r);
                continue;
            }
            lhs_rows.push(vec![(p, 1.0)]);
            let row: Row = match (order, p == 2) {
                (DerivativeOrder::First, true) => FIRST_BOUNDARY.iter().enumerate().map(|(k, &c)| (k, c)).collect(),
                (DerivativeOrder::First, false) => FIRST_BOUNDARY.iter().enumerate().map(|(k, &c)| (n - k, -c)).collect(),
                (DerivativeOrder::Second, true) => SECOND_BOUNDARY.iter().enumerate().map(|(k, &c)| (k, c)).collect(),
                (DerivativeOrder::Second, false) => SECOND_BOUNDARY.iter().enumerate().map(|(k, &c)| (n - k, c)).collect(),
            };
            rhs_rows.push(row);
        }

        let offset = nodes.start;
        let dim = nodes.len();
        let col_of = |node: usize| nodes.contains(&node).then(|| node - offset);
        let quad_slot = |node: usize| match node {
            0 => 0,
            1 => 1,
            x if x == n - 1 => 2,
            _ => 3,
        };

        let (kl, ku) = bandwidths(&lhs_rows, col_of);
        let mut lhs = BandedMatrix::zeros(dim, kl, ku)?;
        for (r, row) in lhs_rows.iter().enumerate() {
            for &(node, c) in row {
                let col = col_of(node).expect("compact left-hand side touches a known node");
                lhs.set(r, col, c);
            }
        }

        let (kl, ku) = bandwidths(&rhs_rows, col_of);
        let mut rhs = BandedMatrix::zeros(dim, kl, ku)?;
        let mut corrections = Vec::new();
        for (r, row) in rhs_rows.iter().enumerate() {
            let mut weights = [0.0; 4];
            let mut touched = false;
            for &(node, c) in row {
                match col_of(node) {
                    Some(col) => rhs.set(r, col, c),
                    None => {
                        weights[quad_slot(node)] += c;
                        touched = true;
                    }
                }
            }
            if touched {
                corrections.push((r, weights));
            }
        }

        let lu = lhs.factor()?;
        Ok(Self {
            order,
            closure,
            grid: *grid,
            lhs,
            rhs,
            scale,
            lu,
            corrections,
        })
    }

    pub fn order(&self) -> DerivativeOrder {
        self.order
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// The `A` side.
    pub fn lhs(&self) -> &BandedMatrix {
        &self.lhs
    }

    /// The `B` side, unscaled.
    pub fn rhs(&self) -> &BandedMatrix {
        &self.rhs
    }

    /// `1/h` or `1/h^2`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lu(&self) -> &BandedLu {
        &self.lu
    }

    /// Number of rows (unknown nodes).
    pub fn dim(&self) -> usize {
        self.lhs.n()
    }

    /// Node indices of the rows.
    pub fn unknown_nodes(&self) -> Range<usize> {
        match self.closure {
            Closure::Interior => 0..self.grid.n() + 1,
            Closure::Dirichlet => 2..self.grid.n() - 1,
        }
    }

    /// Correction weights per affected row, against `[u0, u1, u_{N-1}, u_N]`.
    pub fn correction_weights(&self) -> &[(usize, [f64; 4])] {
        &self.corrections
    }

    /// Correction vector `C` (unscaled) for the given boundary values.
    pub fn correction(&self, bvals: &BoundaryQuad) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.add_correction(bvals, &mut c);
        c
    }

    #[inline]
    pub fn add_correction(&self, bvals: &BoundaryQuad, out: &mut [f64]) {
        for (r, w) in &self.corrections {
            out[*r] += w.iter().zip(&bvals.0).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Derivative at the operator's rows. `u` is a full nodal field; for the
    /// Dirichlet closure only its unknown nodes are read and the four known
    /// values come from `bvals`.
    pub fn apply(&self, u: &Field1D, bvals: &BoundaryQuad) -> Result<Vec<f64>> {
        if u.values.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                got: u.values.len(),
            });
        }
        if self.closure == Closure::Dirichlet && !bvals.is_finite() {
            let x = self.grid.a();
            let value = bvals.0.iter().copied().find(|v| !v.is_finite()).unwrap_or(f64::NAN);
            return Err(Error::NonFinite { x, value });
        }
        let mut out = vec![0.0; self.dim()];
        self.apply_unknowns(&u.values[self.unknown_nodes()], bvals, &mut out);
        Ok(out)
    }

    /// Allocation-free core of [`apply`](Self::apply): `unknowns` holds the
    /// values at the rows' nodes.
    #[inline]
    pub fn apply_unknowns(&self, unknowns: &[f64], bvals: &BoundaryQuad, out: &mut [f64]) {
        self.rhs.matvec_into(unknowns, out);
        if self.closure == Closure::Dirichlet {
            self.add_correction(bvals, out);
        }
        self.lu.solve_in_place(out);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }

    /// Batched [`apply_unknowns`](Self::apply_unknowns) over `quads.len()`
    /// lines. Block `r` of `unknowns` (and of `out`) holds unknown `r` of
    /// every line; `quads[l]` is the boundary data of line `l`.
    pub fn apply_lines(&self, unknowns: &[f64], quads: &[BoundaryQuad], out: &mut [f64]) {
        let len = quads.len();
        self.rhs.matvec_lines(unknowns, out, len);
        if self.closure == Closure::Dirichlet {
            for (r, w) in &self.corrections {
                for (o, q) in out[r * len..(r + 1) * len].iter_mut().zip(quads) {
                    *o += w.iter().zip(&q.0).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        self.lu.solve_lines_in_place(out, len);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }

    /// Dense differentiation matrix `scale * A^{-1} B`.
    pub fn differentiation_matrix(&self) -> Result<DMatrix<f64>> {
        let ainv = dense_inverse(&self.lhs.to_dense())?;
        Ok(ainv * self.rhs.to_dense() * self.scale)
    }
}

/// Six-point one-sided first-derivative weights at nodes 0 and 1 over nodes
/// `0..=5` (times `1/h`); mirrored with a sign flip at the right end.
const ONE_SIDED_FIRST: [[f64; 6]; 2] = [
    [-137.0 / 60.0, 5.0, -5.0, 10.0 / 3.0, -5.0 / 4.0, 1.0 / 5.0],
    [-1.0 / 5.0, -13.0 / 12.0, 2.0, -1.0, 1.0 / 3.0, -1.0 / 20.0],
];

/// First derivative at every node: the Dirichlet compact operator on
/// `2..=N-2` and explicit fifth-order one-sided stencils on the four known
/// nodes. `values` is the full nodal vector.
pub fn first_derivative_all_nodes(op: &DerivativeOperator, values: &[f64]) -> Result<Vec<f64>> {
    if op.order != DerivativeOrder::First || op.closure != Closure::Dirichlet {
        return Err(Error::InvalidParameter(
            "needs the Dirichlet first-derivative operator".into(),
        ));
    }
    let len = op.grid.len();
    if values.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: values.len(),
        });
    }
    let n = op.grid.n();
    let mut out = vec![0.0; len];
    op.apply_unknowns(&values[2..n - 1], &BoundaryQuad::from_values(values), &mut out[2..n - 1]);
    let inv_h = 1.0 / op.grid.h();
    for (p, w) in ONE_SIDED_FIRST.iter().enumerate() {
        out[p] = w.iter().enumerate().map(|(k, c)| c * values[k]).sum::<f64>() * inv_h;
        out[n - p] = -w.iter().enumerate().map(|(k, c)| c * values[n - k]).sum::<f64>() * inv_h;
    }
    Ok(out)
}

/// The banded `B` matrix and correction vector for the given known values.
pub fn assemble_dirichlet_system(
    op: &DerivativeOperator,
    bvals: &BoundaryQuad,
) -> Result<(BandedMatrix, Vec<f64>)> {
    if op.closure != Closure::Dirichlet {
        return Err(Error::InvalidParameter(
            "assemble_dirichlet_system needs a Dirichlet-closed operator".into(),
        ));
    }
    Ok((op.rhs.clone(), op.correction(bvals)))
}
