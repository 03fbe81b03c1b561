//! Uniform grids and the scalar fields sampled on them.
//!
//! Nodes are stored `j = 0..=N`, both endpoints included, so `x_0 = a` and
//! `x_N = b` are always addressable for Dirichlet data.

use crate::{Error, Result};

/// Smallest number of intervals that leaves room for both boundary closures.
pub const MIN_INTERVALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "endpoints must be finite (a = {a}, b = {b})"
            )));
        }
        if b <= a {
            return Err(Error::InvalidGrid(format!(
                "right endpoint {b} must exceed left endpoint {a}"
            )));
        }
        if n < MIN_INTERVALS {
            return Err(Error::InvalidGrid(format!(
                "N = {n} intervals is below the minimum of {MIN_INTERVALS}"
            )));
        }
        Ok(Self {
            a,
            b,
            n,
            h: (b - a) / n as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n + 1).map(move |j| self.node(j))
    }
}

/// Tensor product of two 1D grids; fields are stored row-major with `y`
/// varying fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub gx: Grid1D,
    pub gy: Grid1D,
}

impl Grid2D {
    pub fn new(gx: Grid1D, gy: Grid1D) -> Self {
        Self { gx, gy }
    }

    pub fn len(&self) -> usize {
        self.gx.len() * self.gy.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.gy.len() + j
    }
}

pub fn make_grid(a: f64, b: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(a, b, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl Field1D {
    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Samples `f` at every node. A non-finite sample is an error.
pub fn sample(f: impl Fn(f64) -> f64, grid: &Grid1D) -> Result<Field1D> {
    let values = grid
        .nodes()
        .map(|x| {
            let value = f(x);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::NonFinite { x, value })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Field1D {
        grid: *grid,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn sample(f: impl Fn(f64, f64) -> f64, grid: &Grid2D) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for x in grid.gx.nodes() {
            for y in grid.gy.nodes() {
                let value = f(x, y);
                if !value.is_finite() {
                    return Err(Error::NonFinite { x, value });
                }
                values.push(value);
            }
        }
        Ok(Self {
            grid: *grid,
            values,
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_examples() {
        let g = make_grid(0.0, 30.0, 40).unwrap();
        assert_eq!(g.h(), 0.75);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(40), 30.0);

        assert_eq!(make_grid(0.0, 1.0, 8).unwrap().h(), 0.125);

        let g = make_grid(-10.0, 100.0, 600).unwrap();
        assert_eq!(g.h(), 110.0 / 600.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(0.0, 1.0, 7), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1.0, 1.0, 10), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(2.0, 1.0, 10), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn sampling() {
        let g = make_grid(0.0, 30.0, 40).unwrap();
        let zero = sample(|_| 0.0, &g).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));

        let s = sample(f64::sin, &g).unwrap();
        for (j, v) in s.values.iter().enumerate() {
            assert_eq!(*v, (0.75 * j as f64).sin());
        }

        // h = 0.5 puts a node on the crest at x = 10.
        let g = make_grid(0.0, 30.0, 60).unwrap();
        let (c, k) = (0.03, 0.5);
        let wave = sample(|x| 3.0 * c / (k * (x - 10.0)).cosh().powi(2), &g).unwrap();
        let peak = wave.values.iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - 0.09).abs() < 1e-15);
    }

    #[test]
    fn sampling_rejects_non_finite() {
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let err = sample(|x| 1.0 / x, &g).unwrap_err();
        assert!(matches!(err, Error::NonFinite { x, .. } if x == 0.0));
    }

    #[test]
    fn row_major_layout() {
        let g = Grid2D::new(make_grid(0.0, 1.0, 8).unwrap(), make_grid(0.0, 2.0, 10).unwrap());
        let f = Field2D::sample(|x, y| 100.0 * x + y, &g).unwrap();
        assert_eq!(f.values[1], g.gy.node(1));
        assert_eq!(f.get(1, 0), 100.0 * g.gx.node(1));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn span_is_reproduced(a in -100.0f64..100.0, len in 0.1f64..200.0, n in 8usize..2000) {
                let b = a + len;
                let g = make_grid(a, b, n).unwrap();
                let span = b - a;
                let ulp = f64::EPSILON * span.abs();
                prop_assert!((g.h() * n as f64 - span).abs() <= 4.0 * ulp);
                prop_assert!(((g.node(n) - g.node(0)) - span).abs() <= 1e-12 * span);
            }

            #[test]
            fn sample_is_pointwise(n in 8usize..200, w in 0.1f64..5.0) {
                let g = make_grid(-1.0, 3.0, n).unwrap();
                let f = move |x: f64| (w * x).cos();
                let s = sample(f, &g).unwrap();
                for j in 0..=n {
                    prop_assert_eq!(s.values[j].to_bits(), f(g.a() + j as f64 * g.h()).to_bits());
                }
            }
        }
    }
}
