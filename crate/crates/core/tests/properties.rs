use fracfb::blowup::QuadraticBlowup;
use fracfb::diagnostics::monneau_constant;
use fracfb::freeboundary::{classify_homogeneity, PointClass};
use fracfb::quad::power_integral;
use fracfb::solver::{assemble_operator, SolverConfig};
use fracfb::stopping::dilate_mask;
use fracfb::{build_grid, make_cap_obstacle, solve_obstacle, SolutionField};
use proptest::prelude::*;

fn odd(lo: usize, hi: usize) -> impl Strategy<Value = usize> {
    (lo / 2..=hi / 2).prop_map(|k| 2 * k + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operator_is_symmetric(s in 0.05f64..0.95, n in 1usize..=2, nx in odd(9, 15), ny in odd(9, 15)) {
        let g = build_grid(n, s, 1.0, 1.0, nx, ny).unwrap();
        let op = assemble_operator(&g);
        for i in (0..g.len()).filter(|&i| op.has_full_stencil(i)) {
            for (j, v) in op.row_entries(i).into_iter().filter(|&(j, _)| op.has_full_stencil(j)) {
                let back = op.row_entries(j).into_iter().find(|&(k, _)| k == i).map(|(_, w)| w);
                prop_assert!(back.is_some(), "row {j} misses column {i}");
                let w = back.unwrap();
                prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0), "A[{i},{j}]={v} A[{j},{i}]={w}");
            }
        }
    }

    #[test]
    fn operator_annihilates_constants(s in 0.05f64..0.95, n in 1usize..=2, c in -5.0f64..5.0) {
        let g = build_grid(n, s, 1.0, 1.0, 11, 11).unwrap();
        let op = assemble_operator(&g);
        let u = vec![c; g.len()];
        let au = op.apply(&u);
        for i in (0..g.len()).filter(|&i| op.has_full_stencil(i)) {
            prop_assert!(au[i].abs() <= 1e-10 * c.abs().max(1.0) * op.diag(i));
        }
    }

    #[test]
    fn half_laplacian_is_exact_on_quadratics(a11 in -2.0f64..2.0, a12 in -2.0f64..2.0, a22 in -2.0f64..2.0) {
        let g = build_grid(2, 0.5, 1.0, 1.0, 13, 13).unwrap();
        let op = assemble_operator(&g);
        let p = QuadraticBlowup::new(2, 0.0, [[a11, a12], [a12, a22]]);
        let res = op.consistency_residual(|x, y| p.eval(x, y), 1.0, 0.0, 1.0);
        prop_assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn blowup_is_two_homogeneous(a11 in -2.0f64..2.0, a12 in -2.0f64..2.0, a22 in -2.0f64..2.0,
                                 a in -0.9f64..0.9, x1 in -1.0f64..1.0, x2 in -1.0f64..1.0,
                                 y in -1.0f64..1.0, t in 0.1f64..3.0) {
        let p = QuadraticBlowup::new(2, a, [[a11, a12], [a12, a22]]);
        let lhs = p.eval(&[t * x1, t * x2], t * y);
        let rhs = t * t * p.eval(&[x1, x2], y);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        prop_assert_eq!(p.eval(&[x1, x2], y), p.eval(&[x1, x2], -y));
        prop_assert!((p.b * (1.0 + a) - p.trace_matrix()).abs() < 1e-12);
    }

    #[test]
    fn psd_projection_has_nonnegative_spectrum(a11 in -2.0f64..2.0, a12 in -2.0f64..2.0, a22 in -2.0f64..2.0, a in -0.9f64..0.9) {
        let q = QuadraticBlowup::new(2, a, [[a11, a12], [a12, a22]]).project_psd(a);
        for e in q.eigenvalues() {
            prop_assert!(e >= -1e-12);
        }
        prop_assert!((q.b * (1.0 + a) - q.trace_matrix()).abs() < 1e-12);
    }

    #[test]
    fn cap_is_even_and_bounded(h0 in 0.01f64..0.3, kappa in 1.0f64..4.0, x in -1.0f64..1.0) {
        let o = make_cap_obstacle(1, 1.0, h0, kappa, 0.6, 0.25).unwrap();
        prop_assert_eq!(o.eval_phi(&[x]), o.eval_phi(&[-x]));
        prop_assert!(o.eval_phi(&[x]) <= h0 + 1e-15);
    }

    #[test]
    fn power_integral_is_additive(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, p in -0.9f64..2.0) {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        let whole = power_integral(v[0], v[2], p);
        let parts = power_integral(v[0], v[1], p) + power_integral(v[1], v[2], p);
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1e-12));
    }

    #[test]
    fn dilation_grows_and_erosion_shrinks(bits in proptest::collection::vec(any::<bool>(), 17), k in 1i32..4) {
        let g = build_grid(1, 0.5, 1.0, 1.0, 17, 9).unwrap();
        let grown = dilate_mask(&g, &bits, k);
        let shrunk = dilate_mask(&g, &bits, -k);
        for p in 0..bits.len() {
            prop_assert!(!bits[p] || grown[p]);
            prop_assert!(!shrunk[p] || bits[p]);
        }
    }

    #[test]
    fn monneau_constant_bounds_every_step(ms in proptest::collection::vec(0.0f64..1.0, 2..8), gamma in 0.5f64..2.0) {
        let ladder: Vec<(f64, f64)> = ms.iter().enumerate().map(|(k, &m)| (0.5f64.powi(k as i32), m)).collect();
        let c = monneau_constant(&ladder, gamma);
        prop_assert!(c >= 0.0);
        for w in ladder.windows(2) {
            let bound = c / gamma * (w[0].0.powf(gamma) - w[1].0.powf(gamma));
            prop_assert!(w[0].1 - w[1].1 <= bound * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn homogeneity_near_two_is_singular(s in 0.05f64..0.8, dm in -0.14f64..0.14) {
        prop_assert_eq!(classify_homogeneity(2.0 + dm, s, 0.15), PointClass::Singular);
    }

    #[test]
    fn field_bytes_roundtrip(s in 0.05f64..0.95, seed in any::<u64>()) {
        let g = build_grid(1, s, 1.0, 1.0, 9, 9).unwrap();
        let values: Vec<f64> = (0..g.len()).map(|i| ((seed ^ i as u64) as f64).sin()).collect();
        let f = SolutionField::new(g, values.clone(), true, 0.0, 0, 1.0, Vec::new());
        let back = SolutionField::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(back.values, values);
        prop_assert_eq!(back.grid.params(), f.grid.params());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn solution_is_monotone_in_cap_height(s in 0.2f64..0.8, h in 0.05f64..0.2, dh in 0.01f64..0.1) {
        let g = build_grid(1, s, 1.0, 1.0, 33, 17).unwrap();
        let op = assemble_operator(&g);
        let cfg = SolverConfig { tol: 1e-10, ..SolverConfig::default() }.with_tuned_omega(&g);
        let lo = solve_obstacle(&op, &make_cap_obstacle(1, 1.0, h, 1.0, 0.6, 0.25).unwrap(), &cfg).unwrap();
        let hi = solve_obstacle(&op, &make_cap_obstacle(1, 1.0, h + dh, 1.0, 0.6, 0.25).unwrap(), &cfg).unwrap();
        for (a, b) in lo.values.iter().zip(&hi.values) {
            prop_assert!(*a <= *b + 1e-8, "{a} > {b}");
        }
    }
}
