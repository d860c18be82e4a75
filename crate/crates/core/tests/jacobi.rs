use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;

use chyper::construction::{build_submanifold, SubmanifoldSpec};
use chyper::jacobi::*;
use chyper::linalg::sym_eigen_sorted;
use chyper::model::DEFAULT_STEP;
use chyper::spectral::*;
use chyper::{Error, ModelParams};

fn spec(n: usize, k: usize, c: f64) -> SubmanifoldSpec {
    build_submanifold(ModelParams::new(n, c).unwrap(), k, FRAC_PI_2).unwrap()
}

/// Tube germ with `λ3 ≥ 0`, its decomposition and Hopf frame.
fn catalog_germ(n: usize, k: usize, r: f64) -> (HypersurfaceGerm, PrincipalDecomposition, HopfFrame) {
    let germ = tube_shape_operator(&spec(n, k, -4.0), r, DEFAULT_STEP).unwrap();
    let germ = if classify(&germ, DEFAULT_TOL).flipped { germ.flipped() } else { germ };
    let d = principal_decomposition(&germ, DEFAULT_TOL).unwrap();
    let f = hopf_frame_extract(&germ, &d).unwrap();
    (germ, d, f)
}

#[test]
fn closed_form_matches_ode_oracle() {
    let (germ, _, frame) = catalog_germ(3, 2, 0.5);
    let c = -4.0;
    let jxi = germ.jxi();
    let cases = [(frame.u1.clone(), frame.lambda1), (frame.u2.clone(), frame.lambda2), (frame.a.clone(), frame.lambda3)];
    for (v, lambda) in cases {
        let sv = germ.to_ambient(&(&germ.shape * germ.to_tangent(&v)));
        for t in [0.5, 1.5, 3.0] {
            let (z, _) = jacobi_ode_oracle(&germ.params, &germ.normal, &v, &-sv.clone(), t, DEFAULT_STEP).unwrap();
            let (fc, gc) = jacobi_closed(lambda, v.dot(&jxi), c, t).unwrap();
            let closed = &v * fc + &jxi * gc;
            assert!((z - closed).amax() < 1e-8, "t = {t}");
        }
    }
    // A ⟂ Jξ: no Jγ̇ component
    let (_, g) = jacobi_closed(frame.lambda3, frame.a.dot(&jxi), c, 2.0).unwrap();
    assert!(g.abs() < 1e-12);
    assert_eq!(jacobi_closed(0.7, 0.4, c, 0.0).unwrap(), (1.0, 0.0));
}

#[test]
fn ode_oracle_error_bound_and_order() {
    let (germ, _, frame) = catalog_germ(3, 2, 0.5);
    let v = frame.u1.clone();
    let sv = germ.to_ambient(&(&germ.shape * germ.to_tangent(&v)));
    let t = 2.0;
    let (fc, gc) = jacobi_closed(frame.lambda1, v.dot(&germ.jxi()), -4.0, t).unwrap();
    let closed = &v * fc + germ.jxi() * gc;
    let err = |h: f64| {
        let (z, _) = jacobi_ode_oracle(&germ.params, &germ.normal, &v, &-sv.clone(), t, h).unwrap();
        (z - &closed).amax()
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e1 < 64.0 * 0.02f64.powi(4) * (2.0 * t).exp());
    assert!((e1 / e2).log2() >= 3.5, "{}", (e1 / e2).log2());
}

#[test]
fn d_matrix_is_the_jacobi_map_on_the_hopf_block() {
    // D(t) columns are the (U1, U2) components of the Jacobi fields started
    // from U1 and U2, integrated independently
    let (germ, _, frame) = catalog_germ(3, 2, 0.5);
    for t in [0.3, 1.0, 2.0] {
        let d = d_matrix(t, frame.b1, frame.b2, frame.lambda1, frame.lambda2, -4.0).unwrap();
        for (col, u) in [&frame.u1, &frame.u2].into_iter().enumerate() {
            let su = germ.to_ambient(&(&germ.shape * germ.to_tangent(u)));
            let (z, _) = jacobi_ode_oracle(&germ.params, &germ.normal, u, &-su, t, DEFAULT_STEP).unwrap();
            assert!((z.dot(&frame.u1) - d[(0, col)]).abs() < 1e-8);
            assert!((z.dot(&frame.u2) - d[(1, col)]).abs() < 1e-8);
            assert!(z.dot(&frame.a).abs() < 1e-8);
        }
    }
}

#[test]
fn determinant_and_c_matrix_at_focal_radius() {
    // both identities hold at r = focal radius of λ3
    for c in [-1.0f64, -4.0] {
        let a = (-c).sqrt() / 2.0;
        for i in 1..100 {
            let l3 = a * i as f64 / 100.0;
            let es = eigen_structure_from_lambda3(l3, c, None).unwrap();
            let r = focal_radius(l3, c).unwrap();
            let det = d_matrix_for(&es, c, r).unwrap().determinant();
            assert!((det - sech_cubed(r, c).unwrap()).abs() < 1e-10, "λ3 = {l3}");
            let cm = c_matrix(r, es.b1, es.b2, es.lambda1, es.lambda2, c).unwrap();
            assert!(cm.difference < 1e-10, "λ3 = {l3}: {}", cm.difference);
            let fd = focal_data(&es.clone().with_dimensions(3, 2).unwrap(), c).unwrap();
            assert_eq!(fd.rank, 4);
            assert!((fd.c_matrix.numeric - fd.c_matrix.numeric.transpose()).amax() < 1e-10);
            assert!(fd.c_matrix.numeric.trace().abs() < 1e-10);
        }
    }
}

#[test]
fn determinant_identity_away_from_the_focal_radius() {
    // det D(t) = f3(t)^3, which equals sech^3 only at the focal radius
    let es = eigen_structure_from_lambda3(0.5, -4.0, None).unwrap();
    for t in [0.2, 0.9, 2.0] {
        let det = d_matrix_for(&es, -4.0, t).unwrap().determinant();
        let f3 = f_function(0.5, -4.0, t).unwrap();
        assert!((det - f3.powi(3)).abs() < 1e-12);
    }
}

#[test]
fn c_closed_form_properties() {
    for (b1sq, c) in [(0.3f64, -4.0), (0.5, -1.0), (0.9, -2.5)] {
        let (b1, b2) = (b1sq.sqrt(), (1.0 - b1sq).sqrt());
        let m = c_closed_form(b1, b2, c).unwrap();
        assert!((m - m.transpose()).amax() < 1e-15);
        assert!(m.trace().abs() < 1e-15);
        let ev = m.symmetric_eigen().eigenvalues;
        let a = (-c).sqrt() / 2.0;
        assert!((ev.max() - a).abs() < 1e-14 && (ev.min() + a).abs() < 1e-14);
    }
    let es = eigen_structure_from_lambda3(0.5, -4.0, None).unwrap();
    let r = focal_radius(0.5, -4.0).unwrap();
    assert!(c_matrix(r, es.b1, es.b2, es.lambda1, es.lambda2, -4.0).is_ok());
    assert!(matches!(c_matrix(1.0, 0.6, 0.8, 0.1, 1.0, 4.0), Err(Error::RequiresNegativeCurvature(_))));
}

#[test]
fn focal_ranks() {
    let es = eigen_structure_for_radius(3, 2, -4.0, 0.7).unwrap();
    let r = focal_radius(es.lambda3, -4.0).unwrap();
    assert_eq!(focal_rank(&es, -4.0, r).unwrap(), 4);
    assert_eq!(focal_rank(&es, -4.0, r / 2.0).unwrap(), 5);
    assert_eq!(focal_rank(&es, -4.0, 0.0).unwrap(), 5);
    let fd = focal_data(&es, -4.0).unwrap();
    assert_eq!((fd.rank, fd.k), (4, Some(2)));
    let bare = eigen_structure_from_lambda3(es.lambda3, -4.0, None).unwrap();
    assert!(focal_rank(&bare, -4.0, r).is_err());

    let (germ, _, _) = catalog_germ(3, 2, 0.7);
    assert_eq!(jacobi_rank_numeric(&germ, 0.7, DEFAULT_STEP).unwrap(), 4);
    assert_eq!(jacobi_rank_numeric(&germ, 0.35, DEFAULT_STEP).unwrap(), 5);
    assert_eq!(jacobi_rank_numeric(&germ, 0.0, DEFAULT_STEP).unwrap(), 5);
}

#[test]
fn focal_shape_operator_of_the_limit() {
    for (n, k, r) in [(3, 2, 0.7), (4, 2, 1.1), (4, 3, 0.4)] {
        let (germ, _, frame) = catalog_germ(n, k, r);
        let report = focal_shape_operator(&germ, &frame, r, DEFAULT_STEP).unwrap();
        assert_eq!(report.rank, 2 * n - k);
        assert!(report.max() < 1e-6, "{report:?}");
    }
}

#[test]
fn tube_is_homogeneous_over_the_normal_sphere() {
    let s = spec(4, 3, -4.0);
    let base = sym_eigen_sorted(&tube_shape_operator(&s, 0.9, DEFAULT_STEP).unwrap().shape).0;
    let eta = (&s.normal()[0] + &s.normal()[1] * 0.5 - &s.normal()[2] * 0.3).normalize();
    let tg = tube_germ(&s, &eta, 0.9, DEFAULT_STEP).unwrap();
    assert!(tg.asymmetry < 1e-8);
    let other = sym_eigen_sorted(&tg.germ.shape).0;
    for (x, y) in base.iter().zip(&other) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn tube_errors() {
    let s = spec(3, 2, -4.0);
    assert!(matches!(tube_shape_operator(&s, 3.5, DEFAULT_STEP), Err(Error::OutOfRange(_))));
    assert!(matches!(tube_shape_operator(&s, -0.1, DEFAULT_STEP), Err(Error::OutOfRange(_))));
    assert!(matches!(tube_shape_operator(&s, 0.0, DEFAULT_STEP), Err(Error::Singular(_))));
    assert!(matches!(tube_shape_operator(&s, 0.5, 0.0), Err(Error::NonPositiveStep(_))));
    let tangent = s.tangent[2].clone();
    assert!(matches!(tube_germ(&s, &tangent, 0.5, DEFAULT_STEP), Err(Error::InvalidParams(_))));
    let scaled = &s.normal()[0] * 2.0;
    assert!(tube_germ(&s, &scaled, 0.5, DEFAULT_STEP).is_err());
    assert!(f_function(0.1, 4.0, 1.0).is_err() && g_function(0.1, 4.0, 1.0).is_err());
    assert!(special_radius(1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tube_spectrum_matches_catalog(r in 0.05f64..2.5) {
        let germ = tube_shape_operator(&spec(3, 2, -4.0), r, DEFAULT_STEP).unwrap();
        let germ = if classify(&germ, DEFAULT_TOL).flipped { germ.flipped() } else { germ };
        let es = eigen_structure_for_radius(3, 2, -4.0, r).unwrap();
        let mut expected = vec![es.lambda1, es.lambda2, es.lambda3, es.lambda3, es.lambda4.unwrap_or(es.lambda2)];
        expected.sort_by(f64::total_cmp);
        let got = sym_eigen_sorted(&germ.shape).0;
        for (x, y) in got.iter().zip(&expected) {
            prop_assert!((x - y).abs() <= 1e-6 * y.abs().max(1e-3), "{:?} vs {:?}", got, expected);
        }
    }

    #[test]
    fn equidistant_hypersurfaces_have_three_curvatures(n in 2usize..=4, r in 0.0f64..2.5) {
        let germ = tube_shape_operator(&spec(n, 1, -4.0), r, DEFAULT_STEP).unwrap();
        let d = principal_decomposition(&germ, DEFAULT_TOL).unwrap();
        prop_assert_eq!(d.g, 3);
        prop_assert_eq!(d.h, 2);
    }

    #[test]
    fn coefficient_functions_solve_the_jacobi_equation(l in -3.0f64..3.0, c in -6.0f64..-0.5, t in 0.0f64..3.0) {
        let j = JacobiCoefficients::new(l, c).unwrap();
        prop_assert_eq!(j.f(0.0), 1.0);
        prop_assert_eq!(j.g(0.0), 0.0);
        let (rf, rg) = j.ode_residuals(t, 1e-4);
        let scale = (2.0 * (-c).sqrt() * t).exp() * (1.0 + l.abs()) * (1.0 + c.abs());
        prop_assert!(rf.abs() < 1e-5 * scale && rg.abs() < 1e-5 * scale, "{} {}", rf, rg);
    }
}
