mod common;

use common::{grid_box_distance, naive_mul, rel_err, zonotope_area_mc};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srdkf_core::setcore::{solve_box_least_squares, PZonotope, Zonotope, QP_MAX_SWEEPS, QP_TOLERANCE};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| DMatrix::from_column_slice(rows, cols, &v))
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_map(DVector::from_vec)
}

/// `B Bᵀ + 0.1·I`.
fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n).prop_map(move |b| &b * b.transpose() + DMatrix::identity(n, n) * 0.1)
}

fn pzonotope(n: usize, max_gens: usize) -> impl Strategy<Value = PZonotope> {
    (0..=max_gens)
        .prop_flat_map(move |e| (vector(n), matrix(n, e), spd(n)))
        .prop_map(|(c, g, s)| PZonotope::new(c, g, s).unwrap())
}

fn sorted_columns(m: &DMatrix<f64>) -> Vec<Vec<u64>> {
    let mut cols: Vec<Vec<u64>> = m
        .column_iter()
        .map(|c| c.iter().map(|x| x.to_bits()).collect())
        .collect();
    cols.sort();
    cols
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn minkowski_sum_commutes_up_to_column_order(a in pzonotope(3, 4), b in pzonotope(3, 4)) {
        let ab = a.minkowski_sum(&b).unwrap();
        let ba = b.minkowski_sum(&a).unwrap();
        prop_assert_eq!(ab.center(), ba.center());
        prop_assert_eq!(ab.covariance(), ba.covariance());
        prop_assert_eq!(sorted_columns(ab.generators()), sorted_columns(ba.generators()));
    }

    #[test]
    fn minkowski_sum_associates(a in pzonotope(2, 3), b in pzonotope(2, 3), c in pzonotope(2, 3)) {
        let left = a.minkowski_sum(&b).unwrap().minkowski_sum(&c).unwrap();
        let right = a.minkowski_sum(&b.minkowski_sum(&c).unwrap()).unwrap();
        prop_assert!(rel_err(&DMatrix::from_column_slice(2, 1, left.center().as_slice()),
            &DMatrix::from_column_slice(2, 1, right.center().as_slice())) < 1e-12);
        prop_assert!(rel_err(left.covariance(), right.covariance()) < 1e-12);
        prop_assert_eq!(left.generators(), right.generators());
    }

    #[test]
    fn linear_maps_compose(l in pzonotope(3, 4), a in matrix(2, 2), b in matrix(2, 3)) {
        let nested = l.linear_map(&b).unwrap().linear_map(&a).unwrap();
        let direct = l.linear_map(&(&a * &b)).unwrap();
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        prop_assert!(rel_err(&col(nested.center()), &col(direct.center())) < 1e-12);
        prop_assert!(rel_err(nested.generators(), direct.generators()) < 1e-12 || direct.n_generators() == 0);
        prop_assert!(rel_err(nested.covariance(), direct.covariance()) < 1e-12);
    }

    #[test]
    fn operations_match_direct_formulas(l in pzonotope(3, 5), a in matrix(2, 3), mu in vector(3)) {
        let mapped = l.linear_map(&a).unwrap();
        let g_want = naive_mul(&a, l.generators());
        let s_want = naive_mul(&naive_mul(&a, l.covariance()), &a.transpose());
        if g_want.ncols() > 0 {
            prop_assert!(rel_err(mapped.generators(), &g_want) < 1e-12);
        }
        prop_assert!(rel_err(mapped.covariance(), &s_want) < 1e-12);

        let moved = l.translate(&mu).unwrap();
        for i in 0..3 {
            prop_assert_eq!(moved.center()[i], mu[i] + l.center()[i]);
        }
        prop_assert_eq!(moved.generators(), l.generators());
        prop_assert_eq!(moved.covariance(), l.covariance());
    }

    #[test]
    fn operations_leave_inputs_untouched(a in pzonotope(2, 3), b in pzonotope(2, 3), m in matrix(2, 2)) {
        let (a0, b0) = (a.clone(), b.clone());
        let _ = a.minkowski_sum(&b).unwrap();
        let _ = a.linear_map(&m).unwrap();
        let _ = a.translate(b.center()).unwrap();
        let _ = a.reduce_order(2);
        prop_assert_eq!(a, a0);
        prop_assert_eq!(b, b0);
    }

    #[test]
    fn sup_density_falls_along_rays(l in pzonotope(2, 3), dir in vector(2)) {
        prop_assume!(dir.norm() > 1e-3);
        let dir = dir.normalize();
        let mut prev = f64::INFINITY;
        for step in 0..100 {
            let p = l.center() + &dir * (0.1 * step as f64);
            let d = l.log_sup_density(&p).unwrap();
            prop_assert!(d <= prev + 1e-9, "step {step}: {d} > {prev}");
            prev = d;
        }
    }

    #[test]
    fn box_distance_matches_grid_search(
        (a, r) in (1usize..=3, 1usize..=3).prop_flat_map(|(n, e)| (matrix(n, e), vector(n)))
    ) {
        let qp = solve_box_least_squares(&a, &r, QP_TOLERANCE, QP_MAX_SWEEPS).unwrap();
        let grid = grid_box_distance(&a, &r);
        prop_assert!((qp.distance - grid).abs() < 1e-6, "qp {} grid {}", qp.distance, grid);
        prop_assert!(qp.beta.iter().all(|b| (-1.0..=1.0).contains(b)));
    }

    #[test]
    fn reduce_order_keeps_count_and_encloses(l in pzonotope(2, 8), w in prop::collection::vec(-1.0..1.0f64, 8)) {
        let reduced = l.reduce_order(4);
        prop_assert_eq!(reduced.n_generators(), l.n_generators().min(4));
        prop_assert_eq!(reduced.covariance(), l.covariance());
        // Every point of the original center zonotope stays inside.
        let beta = DVector::from_iterator(l.n_generators(), w.iter().copied().take(l.n_generators()));
        let p = l.center() + l.generators() * beta;
        let inside = reduced.center_zonotope().contains(&p, 1e-9).unwrap();
        prop_assert!(inside);
    }

    #[test]
    fn leveled_polytopes_nest_with_ordered_densities(l in pzonotope(2, 3), gamma in 0.5..6.0f64, levels in 1usize..12) {
        let stack = l.overapprox_leveled_polytopes(gamma, levels).unwrap();
        prop_assert_eq!(stack.len(), levels);
        for lp in &stack {
            prop_assert!(lp.level_density >= lp.density_increment);
            prop_assert!(lp.density_increment >= 0.0);
        }
        for pair in stack.windows(2) {
            prop_assert!(pair[0].level_density <= pair[1].level_density);
            prop_assert!(pair[1].polytope.area() <= pair[0].polytope.area() * (1.0 + 1e-12));
            for v in pair[1].polytope.vertices() {
                let slack = 1e-9 * (1.0 + v.norm());
                let outer = &pair[0].polytope;
                let inside = outer.contains(v) || outer.vertices().iter().any(|w| (w - v).norm() < slack);
                prop_assert!(inside);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn polygon_area_matches_sampling(g in (1usize..=5).prop_flat_map(|e| matrix(2, e)), seed in any::<u64>()) {
        let z = Zonotope::new(DVector::zeros(2), g.clone()).unwrap();
        let area = z.to_polygon().unwrap().area();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mc = zonotope_area_mc(&mut rng, &[0.0, 0.0], &g, 1_000_000);
        let hx: f64 = g.row(0).iter().map(|x| x.abs()).sum();
        let hy: f64 = g.row(1).iter().map(|x| x.abs()).sum();
        // Degenerate or sliver zonotopes have no meaningful relative area.
        prop_assume!(area > 1e-2 * hx * hy);
        prop_assert!((area - mc).abs() <= 0.02 * area, "shoelace {area} sampled {mc}");
    }
}

#[test]
fn hexagon_from_two_generators() {
    let g = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    let z = Zonotope::new(DVector::zeros(2), g.clone()).unwrap();
    let poly = z.to_polygon().unwrap();
    assert!((poly.area() - 4.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mc = zonotope_area_mc(&mut rng, &[0.0, 0.0], &g, 1_000_000);
    assert!((mc - 4.0).abs() < 0.08, "{mc}");
}
