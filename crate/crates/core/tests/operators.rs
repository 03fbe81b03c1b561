use compact6::banded::{dense_oracle_solve, BandedMatrix};
use compact6::operators::{
    assemble_dirichlet_system, build_first_derivative, build_second_derivative, first_derivative_all_nodes,
};
use compact6::stability::{symbol_p, symbol_q};
use compact6::stepper::assemble_mass_system;
use compact6::{make_grid, sample, BoundaryQuad, Closure, DerivativeOperator, Grid1D};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn ulp(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        let b = x.abs().to_bits();
        f64::from_bits(b + 1) - x.abs()
    }
}

fn r(p: i64, q: i64) -> f64 {
    p as f64 / q as f64
}

fn assert_entry(m: &BandedMatrix, i: usize, j: usize, want: f64) {
    let got = m.get(i, j);
    assert!((got - want).abs() <= ulp(want), "entry ({i},{j}) = {got:e}, want {want:e}");
}

/// Every entry of a matrix against a table of (row, col, value); all other
/// entries must be exactly zero.
fn audit(m: &BandedMatrix, table: &[(usize, usize, f64)]) {
    for i in 0..m.n() {
        for j in 0..m.n() {
            match table.iter().find(|e| e.0 == i && e.1 == j) {
                Some(&(_, _, want)) => assert_entry(m, i, j, want),
                None => assert_eq!(m.get(i, j), 0.0, "stray entry at ({i},{j})"),
            }
        }
    }
}

/// Expected entries of a Dirichlet operator on `n` intervals: boundary rows
/// given by `left` (against nodes 0..) and `right` (against nodes n, n-1, ..),
/// interior rows by the centred stencil.
fn expected_dirichlet(n: usize, stencil: &[f64], left: &[f64], right: &[f64]) -> Vec<(usize, usize, f64)> {
    let m = n - 3;
    let half = stencil.len() / 2;
    let mut out = Vec::new();
    let mut push = |row: usize, node: usize, v: f64| {
        if (2..=n - 2).contains(&node) && v != 0.0 {
            out.push((row, node - 2, v));
        }
    };
    for (k, &c) in left.iter().enumerate() {
        push(0, k, c);
    }
    for (k, &c) in right.iter().enumerate() {
        push(m - 1, n - k, c);
    }
    for row in 1..m - 1 {
        let p = row + 2;
        for (k, &c) in stencil.iter().enumerate() {
            push(row, p + k - half, c);
        }
    }
    out
}

#[test]
fn coefficient_audit_first_derivative() {
    let n = 12;
    let g = make_grid(0.0, 1.0, n).unwrap();
    let op = build_first_derivative(&g, Closure::Dirichlet).unwrap();
    let m = n - 3;

    let mut lhs = vec![(0, 0, 1.0), (m - 1, m - 1, 1.0)];
    for row in 1..m - 1 {
        lhs.push((row, row, 1.0));
        lhs.push((row, row - 1, r(1, 3)));
        lhs.push((row, row + 1, r(1, 3)));
    }
    audit(op.lhs(), &lhs);

    let stencil = [r(-1, 36), r(-7, 9), 0.0, r(7, 9), r(1, 36)];
    let left = [r(1, 20), r(-1, 2), r(-1, 3), 1.0, r(-1, 4), r(1, 30)];
    let right: Vec<f64> = left.iter().map(|c| -c).collect();
    audit(op.rhs(), &expected_dirichlet(n, &stencil, &left, &right));

    // Correction weights against [u0, u1, u_{N-1}, u_N].
    let w = op.correction_weights();
    let find = |row: usize| w.iter().find(|e| e.0 == row).map(|e| e.1).unwrap();
    let top = find(0);
    for (got, want) in top.iter().zip([r(1, 20), r(-1, 2), 0.0, 0.0]) {
        assert!((got - want).abs() <= ulp(want));
    }
    let second = find(1);
    for (got, want) in second.iter().zip([0.0, r(-1, 36), 0.0, 0.0]) {
        assert!((got - want).abs() <= ulp(want));
    }
    let bottom = find(m - 1);
    for (got, want) in bottom.iter().zip([0.0, 0.0, r(1, 2), r(-1, 20)]) {
        assert!((got - want).abs() <= ulp(want));
    }
    let penult = find(m - 2);
    for (got, want) in penult.iter().zip([0.0, 0.0, r(1, 36), 0.0]) {
        assert!((got - want).abs() <= ulp(want));
    }
    assert_eq!(w.len(), 4);
    assert_eq!(op.scale(), 1.0 / g.h());
}

#[test]
fn coefficient_audit_second_derivative() {
    let n = 12;
    let g = make_grid(0.0, 1.0, n).unwrap();
    let op = build_second_derivative(&g, Closure::Dirichlet).unwrap();
    let m = n - 3;

    let mut lhs = vec![(0, 0, 1.0), (m - 1, m - 1, 1.0)];
    for row in 1..m - 1 {
        lhs.push((row, row, 1.0));
        lhs.push((row, row - 1, r(2, 11)));
        lhs.push((row, row + 1, r(2, 11)));
    }
    audit(op.lhs(), &lhs);

    let stencil = [r(3, 44), r(12, 11), r(-51, 22), r(12, 11), r(3, 44)];
    let left = [r(-1, 12), r(4, 3), r(-5, 2), r(4, 3), r(-1, 12)];
    audit(op.rhs(), &expected_dirichlet(n, &stencil, &left, &left));

    let w = op.correction_weights();
    let find = |row: usize| w.iter().find(|e| e.0 == row).map(|e| e.1).unwrap();
    for (got, want) in find(0).iter().zip([r(-1, 12), r(4, 3), 0.0, 0.0]) {
        assert!((got - want).abs() <= ulp(want));
    }
    for (got, want) in find(1).iter().zip([0.0, r(3, 44), 0.0, 0.0]) {
        assert!((got - want).abs() <= ulp(want));
    }
    for (got, want) in find(m - 1).iter().zip([0.0, 0.0, r(4, 3), r(-1, 12)]) {
        assert!((got - want).abs() <= ulp(want));
    }
    assert_eq!(op.scale(), 1.0 / (g.h() * g.h()));
}

#[test]
fn smallest_grid_first_row_and_correction() {
    let g = make_grid(0.0, 1.0, 8).unwrap();
    let op = build_first_derivative(&g, Closure::Dirichlet).unwrap();
    let (b, c) = assemble_dirichlet_system(&op, &BoundaryQuad::new(1.0, 2.0, 0.0, 0.0)).unwrap();
    assert_eq!(b.n(), op.dim());
    assert_eq!(op.dim(), 5);
    let row: Vec<f64> = (0..b.n()).map(|j| b.get(0, j)).collect();
    let want = [r(-1, 3), 1.0, r(-1, 4), r(1, 30), 0.0];
    for (g, w) in row.iter().zip(want) {
        assert!((g - w).abs() <= ulp(w));
    }
    assert!((c[0] + 0.95).abs() < 1e-15);
    let (_, c0) = assemble_dirichlet_system(&op, &BoundaryQuad::zero()).unwrap();
    assert_eq!(c0[0], 0.0);
    let interior = build_first_derivative(&g, Closure::Interior).unwrap();
    assert!(assemble_dirichlet_system(&interior, &BoundaryQuad::zero()).is_err());
}

fn poly(d: i32) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let f = move |x: f64| x.powi(d);
    let f1 = move |x: f64| if d == 0 { 0.0 } else { d as f64 * x.powi(d - 1) };
    let f2 = move |x: f64| if d < 2 { 0.0 } else { (d * (d - 1)) as f64 * x.powi(d - 2) };
    (f, f1, f2)
}

/// Residual of every row of `A u' = scale (B u + C)` with exact derivative
/// data: the local consistency of each stencil, independent of the solve.
fn row_residuals(op: &DerivativeOperator, g: &Grid1D, f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let nodes: Vec<usize> = op.unknown_nodes().collect();
    let u: Vec<f64> = nodes.iter().map(|&j| f(g.node(j))).collect();
    let du: Vec<f64> = nodes.iter().map(|&j| df(g.node(j))).collect();
    let bu = op.rhs().matvec(&u).unwrap();
    let c = op.correction(&BoundaryQuad::from_fn(g, f));
    let adu = op.lhs().matvec(&du).unwrap();
    (0..nodes.len()).map(|k| adu[k] - op.scale() * (bu[k] + c[k])).collect()
}

#[test]
fn stencil_rows_are_exact_for_polynomials() {
    let g = make_grid(-0.5, 1.0, 16).unwrap();
    let d1 = build_first_derivative(&g, Closure::Dirichlet).unwrap();
    let d2 = build_second_derivative(&g, Closure::Dirichlet).unwrap();
    let m = d1.dim();
    for deg in 0..=8 {
        let (f, f1, f2) = poly(deg);
        let r1 = row_residuals(&d1, &g, &f, &f1);
        let r2 = row_residuals(&d2, &g, &f, &f2);
        // Interior rows: degree <= 6 (first) and <= 7 (second).
        let int1 = r1[1..m - 1].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let int2 = r2[1..m - 1].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert_eq!(int1 < 1e-9, deg <= 6, "first derivative interior rows, degree {deg}: {int1:e}");
        assert_eq!(int2 < 1e-8, deg <= 7, "second derivative interior rows, degree {deg}: {int2:e}");
        // Closure rows: degree <= 5 for both.
        let b1 = r1[0].abs().max(r1[m - 1].abs());
        let b2 = r2[0].abs().max(r2[m - 1].abs());
        assert_eq!(b1 < 1e-9, deg <= 5, "first derivative closure rows, degree {deg}: {b1:e}");
        assert_eq!(b2 < 1e-8, deg <= 5, "second derivative closure rows, degree {deg}: {b2:e}");
    }
}

#[test]
fn applied_operators_are_exact_for_low_degree() {
    let g = make_grid(0.0, 1.0, 16).unwrap();
    let d1 = build_first_derivative(&g, Closure::Dirichlet).unwrap();
    let d2 = build_second_derivative(&g, Closure::Dirichlet).unwrap();
    for deg in 0..=5 {
        let (f, f1, f2) = poly(deg);
        let u = sample(&f, &g).unwrap();
        let q = BoundaryQuad::from_fn(&g, &f);
        let a1 = d1.apply(&u, &q).unwrap();
        let a2 = d2.apply(&u, &q).unwrap();
        for (k, j) in d1.unknown_nodes().enumerate() {
            let x = g.node(j);
            assert!((a1[k] - f1(x)).abs() < 1e-11, "u' of x^{deg} at {x}");
            assert!((a2[k] - f2(x)).abs() < 1e-9, "u'' of x^{deg} at {x}");
        }
    }
    // The spec examples: constant -> 0, x -> 1, x^2 -> 2.
    let ones = sample(|_| 1.0, &g).unwrap();
    assert!(d1.apply(&ones, &BoundaryQuad::constant(1.0, 1.0)).unwrap().iter().all(|v| v.abs() <= 1e-13));
    assert!(d2.apply(&ones, &BoundaryQuad::constant(1.0, 1.0)).unwrap().iter().all(|v| v.abs() <= 1e-12));
    let sq = sample(|x| x * x, &g).unwrap();
    let d = d2.apply(&sq, &BoundaryQuad::from_fn(&g, |x| x * x)).unwrap();
    assert!(d.iter().all(|v| (v - 2.0).abs() <= 1e-10));
}

#[test]
fn fourier_symbols_match_stability_closed_forms() {
    let h = 0.3;
    let g = make_grid(0.0, 64.0 * h, 64).unwrap();
    for closure in [Closure::Interior, Closure::Dirichlet] {
        let d1 = build_first_derivative(&g, closure).unwrap();
        let d2 = build_second_derivative(&g, closure).unwrap();
        for theta in [0.1, 0.5, 1.0, 2.0, -0.7, 3.0] {
            let symbol = |op: &DerivativeOperator| {
                // A middle row applied to exp(i j theta), relative to the
                // value at the row's own node.
                let row = op.dim() / 2;
                let (a, b) = (op.lhs().to_dense(), op.rhs().to_dense());
                let wave = |c: usize| Complex64::from_polar(1.0, (c as f64 - row as f64) * theta);
                let num: Complex64 = (0..op.dim()).map(|c| wave(c) * b[(row, c)]).sum();
                let den: Complex64 = (0..op.dim()).map(|c| wave(c) * a[(row, c)]).sum();
                num / den * op.scale()
            };
            let s1 = symbol(&d1);
            let s2 = symbol(&d2);
            let w1 = Complex64::new(0.0, symbol_q(theta) / (6.0 * h));
            let w2 = Complex64::new(symbol_p(theta) / (2.0 * h * h), 0.0);
            assert!((s1 - w1).norm() <= 1e-12 * w1.norm().max(1.0), "first, theta {theta}: {s1} vs {w1}");
            assert!((s2 - w2).norm() <= 1e-12 * w2.norm().max(1.0), "second, theta {theta}: {s2} vs {w2}");
        }
    }
}

/// Max error of the Dirichlet operator on `sin` over nodes in `window`.
fn sine_error(order: u8, n: usize, window: (f64, f64)) -> f64 {
    let g = make_grid(0.0, 30.0, n).unwrap();
    let (op, exact): (DerivativeOperator, fn(f64) -> f64) = match order {
        1 => (build_first_derivative(&g, Closure::Dirichlet).unwrap(), f64::cos),
        _ => (build_second_derivative(&g, Closure::Dirichlet).unwrap(), |x: f64| -x.sin()),
    };
    let u = sample(f64::sin, &g).unwrap();
    let d = op.apply(&u, &BoundaryQuad::from_fn(&g, f64::sin)).unwrap();
    op.unknown_nodes()
        .zip(&d)
        .filter(|(j, _)| {
            let x = g.node(*j);
            x >= window.0 && x <= window.1
        })
        .map(|(j, v)| (v - exact(g.node(j))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn richardson_orders_on_sine() {
    let interior = (5.0, 25.0);
    for order in [1u8, 2] {
        for n in [80, 160] {
            let p = (sine_error(order, n, interior) / sine_error(order, 2 * n, interior)).log2();
            assert!((5.7..=6.3).contains(&p), "order-{order} derivative, N = {n}: observed {p}");
        }
    }
    // Second-derivative closure row: the centred five-point formula has
    // fourth-order local truncation error.
    let closure_residual = |n: usize| {
        let g = make_grid(0.0, 1.0, n).unwrap();
        let op = build_second_derivative(&g, Closure::Dirichlet).unwrap();
        row_residuals(&op, &g, &f64::exp, &f64::exp)[0].abs()
    };
    let p = (closure_residual(40) / closure_residual(80)).log2();
    assert!((3.9..=4.1).contains(&p), "closure row order {p}");
}

#[test]
fn dirichlet_apply_matches_dense_assembly() {
    let g = make_grid(0.0, 2.0 * std::f64::consts::PI, 50).unwrap();
    let u = sample(f64::sin, &g).unwrap();
    let q = BoundaryQuad::from_fn(&g, f64::sin);
    for op in [
        build_first_derivative(&g, Closure::Dirichlet).unwrap(),
        build_second_derivative(&g, Closure::Dirichlet).unwrap(),
    ] {
        let a = op.lhs().to_dense();
        let b = op.rhs().to_dense();
        let inner = DVector::from_iterator(op.dim(), op.unknown_nodes().map(|j| u.values[j]));
        let rhs = &b * inner + DVector::from_vec(op.correction(&q));
        let dense = a.lu().solve(&rhs).unwrap() * op.scale();
        let banded = op.apply(&u, &q).unwrap();
        for (x, y) in banded.iter().zip(dense.iter()) {
            assert!((x - y).abs() <= 1e-11, "{x} vs {y}");
        }
    }
}

#[test]
fn derivative_at_known_nodes_is_fifth_order() {
    let err = |n: usize| {
        let g = make_grid(0.0, 3.0, n).unwrap();
        let op = build_first_derivative(&g, Closure::Dirichlet).unwrap();
        let u = sample(f64::sin, &g).unwrap();
        let d = first_derivative_all_nodes(&op, &u.values).unwrap();
        [0, 1, n - 1, n].iter().map(|&j| (d[j] - g.node(j).cos()).abs()).fold(0.0, f64::max)
    };
    let p = (err(40) / err(80)).log2();
    assert!((4.7..=5.5).contains(&p), "observed {p}");
    let g = make_grid(0.0, 1.0, 10).unwrap();
    let op2 = build_second_derivative(&g, Closure::Dirichlet).unwrap();
    assert!(first_derivative_all_nodes(&op2, &[0.0; 11]).is_err());
}

#[test]
fn interior_second_difference_band_is_symmetric() {
    let g = make_grid(0.0, 1.0, 30).unwrap();
    let b = build_second_derivative(&g, Closure::Interior).unwrap().rhs().clone();
    let x: Vec<f64> = (0..b.n()).map(|k| (k as f64 * 0.37).sin()).collect();
    let y: Vec<f64> = (0..b.n()).map(|k| (k as f64 * 1.3).cos()).collect();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(p, q)| p * q).sum::<f64>();
    let yb = dot(&y, &b.matvec(&x).unwrap());
    let xb = dot(&x, &b.matvec(&y).unwrap());
    assert!((yb - xb).abs() <= 1e-13 * yb.abs().max(1.0));
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn banded_solves_match_dense_oracle(n in 8usize..=200, delta in 0.0f64..3.0, seed in 0u64..1000) {
        let g = make_grid(-1.0, 2.0, n).unwrap();
        let rhs_for = |m: usize| -> Vec<f64> {
            (0..m).map(|k| ((k as u64 * 7919 + seed) as f64 * 0.618).sin()).collect()
        };
        let mut systems: Vec<BandedMatrix> = Vec::new();
        for closure in [Closure::Interior, Closure::Dirichlet] {
            systems.push(build_first_derivative(&g, closure).unwrap().lhs().clone());
            systems.push(build_second_derivative(&g, closure).unwrap().lhs().clone());
        }
        let d2 = build_second_derivative(&g, Closure::Dirichlet).unwrap();
        systems.push(assemble_mass_system(&g, delta, &d2).unwrap().matrix().clone());
        for m in &systems {
            let b = rhs_for(m.n());
            let banded = m.factor().unwrap().solve(&b).unwrap();
            let dense = dense_oracle_solve(&m.to_dense(), &b).unwrap();
            prop_assert!(rel_diff(&banded, &dense) <= 1e-10);
        }
    }

    #[test]
    fn dense_roundtrip_of_band(n in 9usize..60, kl in 0usize..4, ku in 0usize..4) {
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                d[(i, j)] = ((i * 31 + j * 17) % 13) as f64 - 6.0 + if i == j { 20.0 } else { 0.0 };
            }
        }
        let b = BandedMatrix::from_dense_band(&d, kl, ku).unwrap();
        prop_assert_eq!(b.to_dense(), d);
    }
}
