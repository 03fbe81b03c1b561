//! Band storage and a partially pivoted band LU.
//!
//! Every linear system in the scheme (the compact left-hand sides, the mass
//! matrix, the per-mode systems of the 2D solve) is banded with bandwidth at
//! most a handful of diagonals, so factorization and solves are `O(n)`.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Square banded matrix. Row `i` stores columns `i - kl ..= i + ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    /// Bandwidths wider than the matrix are clipped to `n - 1`.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("empty banded matrix".into()));
        }
        let (kl, ku) = (kl.min(n - 1), ku.min(n - 1));
        Ok(Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self {
            n,
            kl: 0,
            ku: 0,
            data: vec![0.0; n],
        };
        m.data.iter_mut().for_each(|d| *d = 1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            self.in_band(i, j),
            "entry ({i}, {j}) outside band kl = {}, ku = {}",
            self.kl,
            self.ku
        );
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    /// Column range of the band in row `i`.
    #[inline]
    pub fn row_span(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    /// `out = self * v`. Lengths must equal `n`.
    #[inline]
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        let w = self.width();
        let (kl, n) = (self.kl, self.n);
        let edge = |i: usize| {
            let span = self.row_span(i);
            let offset = i * w + span.start + kl - i;
            self.data[offset..offset + span.len()]
                .iter()
                .zip(&v[span])
                .map(|(a, x)| a * x)
                .sum::<f64>()
        };
        if n < w {
            for (i, o) in out.iter_mut().enumerate() {
                *o = edge(i);
            }
            return;
        }
        for i in (0..kl).chain(n - self.ku..n) {
            out[i] = edge(i);
        }
        // Full-width rows.
        for ((o, row), win) in out[kl..n - self.ku]
            .iter_mut()
            .zip(self.data[kl * w..].chunks_exact(w))
            .zip(v.windows(w))
        {
            *o = row.iter().zip(win).map(|(a, x)| a * x).sum();
        }
    }

    /// Applies the matrix to `len` interleaved vectors: entry `k` of every
    /// vector lives in the contiguous block `v[k * len..(k + 1) * len]`.
    pub fn matvec_lines(&self, v: &[f64], out: &mut [f64], len: usize) {
        debug_assert_eq!(v.len(), self.n * len);
        debug_assert_eq!(out.len(), self.n * len);
        let w = self.width();
        for (i, o) in out.chunks_exact_mut(len).enumerate() {
            o.fill(0.0);
            for j in self.row_span(i) {
                let a = self.data[i * w + j + self.kl - i];
                if a != 0.0 {
                    for (x, y) in o.iter_mut().zip(&v[j * len..(j + 1) * len]) {
                        *x += a * y;
                    }
                }
            }
        }
    }

    /// `a * self + b * other`, with the band widened to cover both.
    pub fn combine(&self, a: f64, other: &BandedMatrix, b: f64) -> Result<BandedMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut out = BandedMatrix::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku))?;
        for i in 0..self.n {
            for j in out.row_span(i) {
                out.set(i, j, a * self.get(i, j) + b * other.get(i, j));
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Extracts the band of a dense matrix, discarding everything outside it.
    pub fn from_dense_band(m: &DMatrix<f64>, kl: usize, ku: usize) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let mut out = BandedMatrix::zeros(m.nrows(), kl, ku)?;
        for i in 0..out.n {
            for j in out.row_span(i) {
                out.set(i, j, m[(i, j)]);
            }
        }
        Ok(out)
    }

    pub fn factor(&self) -> Result<BandedLu> {
        banded_lu(self)
    }
}

/// LU factors of a [`BandedMatrix`] with row interchanges.
///
/// The upper factor has bandwidth `kl + ku` (fill from pivoting). Multipliers
/// of step `k` are stored in the order the rows were eliminated, so a solve
/// replays the interchanges and eliminations in the same sequence.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    uw: usize,
    upper: Vec<f64>,
    inv_diag: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

pub fn banded_lu(m: &BandedMatrix) -> Result<BandedLu> {
    let n = m.n;
    let kl = m.kl;
    let uw = m.kl + m.ku; // upper bandwidth of U
    // Working row r covers columns r - kl ..= r + kl + ku.
    let w = kl + uw + 1;
    let mut work = vec![0.0; n * w];
    for i in 0..n {
        for j in m.row_span(i) {
            work[i * w + j + kl - i] = m.get(i, j);
        }
    }
    let at = |r: usize, c: usize| r * w + c + kl - r;

    let mut pivots = vec![0usize; n];
    let mut lower = vec![0.0; n * kl.max(1)];
    let mut tmp_k = vec![0.0; uw + 1];
    let mut tmp_p = vec![0.0; uw + 1];

    for k in 0..n {
        let last_row = (k + kl).min(n - 1);
        let last_col = (k + uw).min(n - 1);
        let mut p = k;
        let mut best = work[at(k, k)].abs();
        for r in k + 1..=last_row {
            let v = work[at(r, k)].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Singular(k));
        }
        pivots[k] = p;
        if p != k {
            // Columns k..=last_col hold every remaining nonzero of both rows.
            for c in k..=last_col {
                tmp_k[c - k] = work[at(k, c)];
                tmp_p[c - k] = work[at(p, c)];
            }
            for c in k..=last_col {
                work[at(k, c)] = tmp_p[c - k];
                work[at(p, c)] = tmp_k[c - k];
            }
        }
        let pivot = work[at(k, k)];
        for r in k + 1..=last_row {
            let factor = work[at(r, k)] / pivot;
            lower[k * kl + (r - k - 1)] = factor;
            work[at(r, k)] = 0.0;
            if factor != 0.0 {
                for c in k + 1..=last_col {
                    work[at(r, c)] -= factor * work[at(k, c)];
                }
            }
        }
    }

    let mut upper = vec![0.0; n * (uw + 1)];
    for k in 0..n {
        for c in k..=(k + uw).min(n - 1) {
            upper[k * (uw + 1) + c - k] = work[at(k, c)];
        }
    }
    let inv_diag = (0..n).map(|k| 1.0 / upper[k * (uw + 1)]).collect();
    Ok(BandedLu {
        n,
        kl,
        uw,
        upper,
        inv_diag,
        lower,
        pivots,
    })
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Overwrites `b` with the solution. `b.len()` must equal `n`.
    #[inline]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + kl).min(n - 1);
                let l = &self.lower[k * kl..k * kl + (last - k)];
                for (x, f) in b[k + 1..=last].iter_mut().zip(l) {
                    *x -= f * bk;
                }
            }
        }
        let w = self.uw + 1;
        for k in (0..n).rev() {
            let last = (k + self.uw).min(n - 1);
            let row = &self.upper[k * w + 1..k * w + 1 + (last - k)];
            let s: f64 = row.iter().zip(&b[k + 1..=last]).map(|(a, x)| a * x).sum();
            b[k] = (b[k] - s) * self.inv_diag[k];
        }
    }

    /// Solves for `len` interleaved right-hand sides at once, laid out as in
    /// [`BandedMatrix::matvec_lines`].
    pub fn solve_lines_in_place(&self, b: &mut [f64], len: usize) {
        debug_assert_eq!(b.len(), self.n * len);
        let n = self.n;
        let kl = self.kl;
        for k in 0..n {
            let p = self.pivots[k];
            let (head, tail) = b.split_at_mut((k + 1) * len);
            let bk = &mut head[k * len..];
            if p != k {
                bk.swap_with_slice(&mut tail[(p - k - 1) * len..(p - k) * len]);
            }
            let last = (k + kl).min(n - 1);
            for r in k + 1..=last {
                let f = self.lower[k * kl + (r - k - 1)];
                if f != 0.0 {
                    for (x, y) in tail[(r - k - 1) * len..(r - k) * len].iter_mut().zip(bk.iter()) {
                        *x -= f * y;
                    }
                }
            }
        }
        let w = self.uw + 1;
        for k in (0..n).rev() {
            let last = (k + self.uw).min(n - 1);
            let (head, tail) = b.split_at_mut((k + 1) * len);
            let bk = &mut head[k * len..];
            for c in k + 1..=last {
                let a = self.upper[k * w + c - k];
                if a != 0.0 {
                    for (x, y) in bk.iter_mut().zip(&tail[(c - k - 1) * len..(c - k) * len]) {
                        *x -= a * y;
                    }
                }
            }
            let d = self.inv_diag[k];
            for x in bk.iter_mut() {
                *x *= d;
            }
        }
    }
}

/// Textbook Gaussian elimination with partial pivoting on a dense matrix.
/// Reference path for validating the banded kernels.
pub fn dense_oracle_solve(m: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut a = m.clone();
    let mut b = rhs.to_vec();
    for k in 0..n {
        let (p, best) = (k..n)
            .map(|r| (r, a[(r, k)].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 {
            return Err(Error::Singular(k));
        }
        if p != k {
            a.swap_rows(k, p);
            b.swap(k, p);
        }
        for r in k + 1..n {
            let f = a[(r, k)] / a[(k, k)];
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                let v = a[(k, c)];
                a[(r, c)] -= f * v;
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[(k, c)] * x[c]).sum();
        x[k] = (b[k] - s) / a[(k, k)];
    }
    Ok(x)
}

/// Dense inverse by repeated oracle solves.
pub fn dense_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut inv = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = dense_oracle_solve(m, &e)?;
        for (i, v) in col.into_iter().enumerate() {
            inv[(i, j)] = v;
        }
    }
    Ok(inv)
}
