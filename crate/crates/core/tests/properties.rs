use proptest::prelude::*;

use dirichlet_lattice::confined::{build_confined, reversibility_defect, sample_path};
use dirichlet_lattice::geometry::{Cell, NO_SITE};
use dirichlet_lattice::spectral::{principal_eigenpair_with, EigenOptions};
use dirichlet_lattice::verify::lipschitz_constant;
use dirichlet_lattice::walkstats::{exact_hitting_solve, tilted_exit_point, AnnulusSetup};
use dirichlet_lattice::{assemble, discretize, renormalize, DomainSpec, Normalization};

fn small_spec() -> impl Strategy<Value = (DomainSpec, u32)> {
    let ball = (2usize..=3, 0.6f64..1.5).prop_map(|(d, r)| DomainSpec::ball(d, r));
    let ellipse = prop::collection::vec(0.4f64..1.6, 2).prop_map(DomainSpec::ellipse);
    let boxed = prop::collection::vec(0.3f64..1.4, 2..=3).prop_map(DomainSpec::boxed);
    (prop_oneof![ball, ellipse, boxed], 2u32..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discretization_is_consistent((spec, n) in small_spec()) {
        let d = discretize(&spec, n).unwrap();
        for i in 0..d.len() {
            prop_assert!(spec.contains_scaled(d.site(i), n));
            let mut touches_boundary = false;
            for dir in 0..2 * d.dim() {
                match d.neighbor(i, dir) {
                    Some(j) => {
                        prop_assert_eq!(d.neighbor(j, dir ^ 1), Some(i));
                        prop_assert!(d.dist_to_boundary(i).abs_diff(d.dist_to_boundary(j)) <= 1);
                    }
                    None => {
                        touches_boundary = true;
                        prop_assert!(matches!(d.cell(&d.shifted(i, dir)), Cell::Boundary(_)));
                    }
                }
            }
            prop_assert!(d.dist_to_boundary(i) >= 1);
            prop_assert_eq!(d.dist_to_boundary(i) == 1, touches_boundary);
        }
        for z in d.boundary() {
            prop_assert!(d.index_of(z).is_none());
        }
    }

    #[test]
    fn kernel_is_symmetric_and_substochastic((spec, n) in small_spec()) {
        let d = discretize(&spec, n).unwrap();
        let k = assemble(&d);
        let dense = k.to_dense();
        prop_assert_eq!(&dense, &dense.transpose());
        for i in 0..d.len() {
            let s = k.row_sum(i);
            prop_assert!(s <= 1.0 + 1e-15);
            prop_assert!((s - d.interior_degree(i) as f64 / (2 * d.dim()) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn box_eigenvalue_is_tensor_formula(a in 1u32..9, b in 1u32..9) {
        // a x b interior points
        let spec = DomainSpec::boxed(vec![(a as f64 + 1.0) / 2.0, (b as f64 + 1.0) / 2.0])
            .with_center(vec![if a % 2 == 0 { 0.5 } else { 0.0 }, if b % 2 == 0 { 0.5 } else { 0.0 }]);
        let d = discretize(&spec, 1).unwrap();
        prop_assert_eq!(d.len(), (a * b) as usize);
        let p = principal_eigenpair_with(&assemble(&d), &d, &EigenOptions::default()).unwrap();
        let pi = std::f64::consts::PI;
        let expect = if a * b == 1 {
            0.0
        } else {
            ((pi / (a + 1) as f64).cos() + (pi / (b + 1) as f64).cos()) / 2.0
        };
        prop_assert!((p.lambda - expect).abs() < 1e-10, "{} vs {}", p.lambda, expect);
        prop_assert!(p.phi.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn renormalization_preserves_shape((spec, n) in small_spec(), mode in prop_oneof![
        Just(Normalization::L1), Just(Normalization::Sup), Just(Normalization::Point)
    ]) {
        let d = discretize(&spec, n).unwrap();
        prop_assume!(d.len() >= 2);
        let p = principal_eigenpair_with(&assemble(&d), &d, &EigenOptions::default()).unwrap();
        let q = renormalize(&p, mode);
        prop_assert_eq!(q.lambda, p.lambda);
        let c = q.phi[0] / p.phi[0];
        for (a, b) in p.phi.iter().zip(q.phi.iter()) {
            prop_assert!((b / a - c).abs() < 1e-12 * c);
        }
        let back = renormalize(&q, Normalization::L2);
        prop_assert!((back.l2_norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_pairs_never_exceed_edges((spec, n) in small_spec()) {
        let d = discretize(&spec, n).unwrap();
        let p = principal_eigenpair_with(&assemble(&d), &d, &EigenOptions::default()).unwrap();
        let l2 = lipschitz_constant(&p, &d);
        prop_assert!(l2.pairs <= l2.edge);
        prop_assert_eq!(l2.group_order % l2.orbit_size, 0);
        let s = renormalize(&p, Normalization::Sup);
        let sup = lipschitz_constant(&s, &d);
        let ratio = s.phi[0] / p.phi[0];
        prop_assert!((sup.edge / l2.edge - ratio).abs() < 1e-12 * ratio);
    }

    #[test]
    fn confined_kernel_is_stochastic_and_reversible((spec, n) in small_spec(), seed in any::<u64>()) {
        let d = discretize(&spec, n).unwrap();
        prop_assume!(d.len() >= 2);
        let p = principal_eigenpair_with(&assemble(&d), &d, &EigenOptions::default()).unwrap();
        let k = build_confined(&p, &d).unwrap();
        prop_assert!(k.max_row_defect < 1e-10);
        prop_assert!(reversibility_defect(&k, &p.phi) < 1e-12);
        let path = sample_path(&k, d.origin_index(), 200, seed).unwrap();
        for w in path.windows(2) {
            prop_assert!(d.neighbor_row(w[0]).iter().any(|&j| j != NO_SITE && j as usize == w[1]));
        }
    }

    #[test]
    fn annulus_hitting_probabilities_are_complementary(r in 3u32..7, alpha in 1.5f64..2.5, dim in 2usize..=3) {
        let setup = AnnulusSetup { radius: r, alpha, start: {
            let mut x = vec![0; dim];
            x[0] = r as i32;
            x
        }};
        let region = setup.region().unwrap();
        let outer = (alpha * r as f64).powi(2);
        let to_outer = exact_hitting_solve(&region, &|y: &[i32]| {
            let r2: i64 = y.iter().map(|&v| (v as i64).pow(2)).sum();
            if r2 as f64 >= outer { 1.0 } else { 0.0 }
        }, 1.0).unwrap();
        let to_inner = exact_hitting_solve(&region, &|y: &[i32]| {
            let r2: i64 = y.iter().map(|&v| (v as i64).pow(2)).sum();
            if (r2 as f64) < outer { 1.0 } else { 0.0 }
        }, 1.0).unwrap();
        for (a, b) in to_outer.values.iter().zip(&to_inner.values) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(a));
            prop_assert!((a + b - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tilted_exit_values_increase_with_tilt(r in 4u32..12, c1 in 0.0f64..0.5, dc in 0.01f64..0.5) {
        let lo = tilted_exit_point(&[0, 0], r, c1).unwrap();
        let hi = tilted_exit_point(&[0, 0], r, c1 + dc).unwrap();
        for (a, b) in lo.values.iter().zip(&hi.values) {
            prop_assert!(b > a);
        }
        if c1 == 0.0 {
            prop_assert!((lo.sum() - 1.0).abs() < 1e-10);
        }
    }
}
