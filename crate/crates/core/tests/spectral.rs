use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chyper::construction::build_submanifold;
use chyper::jacobi::{special_radius, tube_shape_operator};
use chyper::model::DEFAULT_STEP;
use chyper::spectral::*;
use chyper::{Error, ModelParams};

fn tube(n: usize, k: usize, r: f64) -> HypersurfaceGerm {
    let spec = build_submanifold(ModelParams::new(n, -4.0).unwrap(), k, FRAC_PI_2).unwrap();
    tube_shape_operator(&spec, r, DEFAULT_STEP).unwrap()
}

fn oriented(germ: HypersurfaceGerm) -> HypersurfaceGerm {
    if classify(&germ, DEFAULT_TOL).flipped {
        germ.flipped()
    } else {
        germ
    }
}

#[test]
fn catalog_identities_on_a_grid() {
    for c in [-1.0f64, -4.0] {
        let a = (-c).sqrt() / 2.0;
        for i in 0..1000 {
            let l3 = a * i as f64 / 1000.0;
            let es = eigen_structure_from_lambda3(l3, c, None).unwrap();
            let res = constraint_residuals(&es, c);
            assert!(res.ordered, "λ3 = {l3}");
            assert!(res.b_sum < 1e-12);
            assert!(res.quadratic < 1e-10);
            // the b-formula of the proof against the one from the relations
            assert!(res.b1_formula < 1e-12 && res.b2_formula < 1e-12, "{res:?}");
            if let Some(r4) = res.lambda4_relation {
                assert!(r4 < 1e-12);
            }
            assert!(es.lambda1 < es.lambda3 && es.lambda3 < es.lambda2);
        }
    }
}

#[test]
fn catalog_examples() {
    let es = eigen_structure_from_lambda3(0.0, -4.0, None).unwrap();
    assert_eq!((es.lambda1, es.lambda2, es.branch), (-1.0, 1.0, Branch::G3K1));
    assert!((es.b1sq() - 0.5).abs() < 1e-15 && (es.b2sq() - 0.5).abs() < 1e-15);

    let s = 1.0 / 3f64.sqrt();
    let es = eigen_structure_from_lambda3(s, -4.0, None).unwrap();
    assert_eq!(es.branch, Branch::G3KBig);
    assert!(es.lambda1.abs() < 1e-15 && (es.lambda2 - 3f64.sqrt()).abs() < 1e-15);
    assert!((es.b1sq() - 1.0 / 9.0).abs() < 1e-15 && (es.b2sq() - 8.0 / 9.0).abs() < 1e-15);

    let es = eigen_structure_from_lambda3(0.5, -4.0, None).unwrap();
    assert_eq!(es.branch, Branch::G4);
    assert!((es.lambda1 + 0.15138781886599736).abs() < 1e-12);
    assert!((es.lambda2 - 1.6513878188659974).abs() < 1e-12);
    assert_eq!(es.lambda4, Some(2.0));

    let es = eigen_structure_from_lambda3(special_lambda3(-1.0), -1.0, None).unwrap();
    assert_eq!(es.branch, Branch::G3KBig);
    assert!((es.lambda2 - 3f64.sqrt() / 2.0).abs() < 1e-15);
    assert!(constraint_residuals(&es, -1.0).max() < 1e-12);

    assert!(matches!(eigen_structure_from_lambda3(0.5, 4.0, None), Err(Error::NoRealSolution(_))));
    assert!(matches!(eigen_structure_from_lambda3(1.0, -4.0, None), Err(Error::NoRealSolution(_))));
}

#[test]
fn perturbation_is_flagged_linearly() {
    let mut es = eigen_structure_from_lambda3(0.5, -4.0, None).unwrap();
    es.lambda2 += 1e-6;
    let res = constraint_residuals(&es, -4.0);
    // ∂/∂λ2 of the quadratic relation is 8λ3 − 4λ1
    let slope = 8.0 * es.lambda3 - 4.0 * es.lambda1;
    assert!((res.quadratic - slope * 1e-6).abs() < 1e-9, "{}", res.quadratic);
    assert!(res.flagged(1e-10));
}

fn toy_germ(shape: DMatrix<f64>) -> HypersurfaceGerm {
    // n = 2: ξ = B, tangent basis (Z, e, Je), so Jξ = Z is the first tangent vector
    let params = ModelParams::new(2, -4.0).unwrap();
    let normal = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    let tangent = DMatrix::from_fn(4, 3, |i, j| (i == j + 1) as u8 as f64);
    HypersurfaceGerm::new(params, normal, tangent, shape)
}

#[test]
fn hopf_germ_decomposition() {
    let germ = toy_germ(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 2.0])));
    let d = principal_decomposition(&germ, DEFAULT_TOL).unwrap();
    assert_eq!((d.g, d.h), (2, 1));
    assert_eq!(d.multiplicities.iter().sum::<usize>(), 3);
    let total = d.projections.iter().fold(DVector::zeros(3), |acc, p| acc + p);
    assert!((germ.to_ambient(&total) - germ.jxi()).amax() < 1e-14);
    assert!(matches!(hopf_frame_extract(&germ, &d), Err(Error::NotApplicable(_))));
    assert!(principal_decomposition(&germ, 0.0).is_err());
    assert!(!classify(&germ, DEFAULT_TOL).is_classified());
}

#[test]
fn random_symmetric_germs_are_unclassified() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-2.0..2.0));
        let res = classify(&toy_germ(&m + m.transpose()), DEFAULT_TOL);
        assert_eq!(res.model, Model::Unclassified);
        assert!(res.reason.is_some());
    }
    let mut bad = toy_germ(DMatrix::identity(3, 3));
    bad.shape[(0, 1)] = 0.5;
    assert!(bad.validate(1e-9).is_err());
    assert_eq!(classify(&bad, DEFAULT_TOL).model, Model::Unclassified);
}

#[test]
fn tube_decomposition_and_frame() {
    let germ = oriented(tube(3, 2, 0.7));
    let d = principal_decomposition(&germ, DEFAULT_TOL).unwrap();
    assert_eq!((d.g, d.h), (4, 2));
    let f = hopf_frame_extract(&germ, &d).unwrap();
    let report = lemma_a_check(&germ, &f);
    assert!(report.pass(1e-9), "{report:?}");
    assert!(report.ju1_u2 < 1e-12);
    let es = eigen_structure_for_radius(3, 2, -4.0, 0.7).unwrap();
    assert!((f.b1 * f.b1 - es.b1sq()).abs() < 1e-8);

    let swapped = f.swapped(&germ);
    assert!(!lemma_a_check(&germ, &swapped).pass(1e-9));

    let tr = totally_real_check(&germ, &d, &f, 1e-9).unwrap();
    assert_eq!(tr.branch, Branch::G4);
    assert!(tr.pass, "{tr:?}");
    // J composed with a rotation of the ambient (e1, e2) plane is no longer compatible
    let mut twisted = germ.clone();
    let (cs, sn) = (0.3f64.cos(), 0.3f64.sin());
    let mut rot = DMatrix::identity(6, 6);
    rot[(2, 2)] = cs;
    rot[(2, 4)] = -sn;
    rot[(4, 2)] = sn;
    rot[(4, 4)] = cs;
    twisted.jmat = &germ.jmat * rot;
    assert!(!totally_real_check(&twisted, &d, &f, 1e-9).map(|r| r.pass).unwrap_or(false));
}

#[test]
fn enlarged_lambda2_space_at_the_special_radius() {
    let germ = oriented(tube(4, 2, special_radius(-4.0).unwrap()));
    let d = principal_decomposition(&germ, DEFAULT_TOL).unwrap();
    assert_eq!(d.g, 3);
    let f = hopf_frame_extract(&germ, &d).unwrap();
    let tr = totally_real_check(&germ, &d, &f, 1e-8).unwrap();
    assert_eq!(tr.branch, Branch::G3KBig);
    assert_eq!(tr.dim, 1);
    assert!(tr.pass, "{tr:?}");
    let res = classify(&germ, DEFAULT_TOL);
    assert_eq!(res.branch, Some(Branch::G3KBig));
}

#[test]
fn ruled_hypersurface_itself() {
    let germ = tube(3, 1, 0.0);
    let res = classify(&germ, DEFAULT_TOL);
    assert_eq!(res.model, Model::Equidistant);
    assert!(res.r.unwrap().abs() < 1e-12);
    let d = principal_decomposition(&germ, DEFAULT_TOL).unwrap();
    let f = hopf_frame_extract(&germ, &d).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((f.b1 - h).abs() < 1e-12 && (f.b2 - h).abs() < 1e-12);
}

#[test]
fn classification_json_schema() {
    let res = classify(&tube(3, 2, 0.7), DEFAULT_TOL);
    let v = res.to_json();
    assert_eq!(v["model"], "tube");
    assert_eq!(v["branch"], "G4");
    for key in ["g", "h", "k", "r", "residuals"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let germ = tube(2, 1, 0.3);
    let text = serde_json::to_string(&germ).unwrap();
    let raw: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut keys: Vec<&str> = raw.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["J", "c", "n", "normal", "shape", "tangent_basis"]);
    let back: HypersurfaceGerm = serde_json::from_str(&text).unwrap();
    assert_eq!(back, germ);
    assert!(serde_json::from_str::<HypersurfaceGerm>(r#"{"n": 2, "c": -4.0}"#).is_err());
}

#[test]
fn scan_both_signs() {
    let grid = ScanGrid { lambda3_points: 200, lambda1_points: 200 };
    let pos = nonexistence_scan(4.0, grid).unwrap();
    assert_eq!(pos.feasible, 0);
    assert!(pos.certificate.is_some());
    let neg = nonexistence_scan(-4.0, grid).unwrap();
    assert!(neg.feasible > 0);
    assert!(neg.max_curve_deviation.unwrap() < 1e-9);
    for p in &neg.points {
        let es = eigen_structure_from_lambda3(p.lambda3, -4.0, None).unwrap();
        assert!((p.b1sq - es.b1sq()).abs() < 1e-9);
        assert!(p.lambda1 < p.lambda2);
    }
    assert!(nonexistence_scan(0.0, grid).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn classify_round_trip_and_flip_invariance(n in 2usize..=4, kk in 0usize..3, r in 0.1f64..2.0) {
        let k = 1 + kk % (n - 1);
        let germ = tube(n, k, r);
        let res = classify(&germ, DEFAULT_TOL);
        prop_assert!(res.is_classified(), "{:?}", res.reason);
        prop_assert_eq!(res.k, k);
        prop_assert!((res.r.unwrap() - r).abs() < 1e-6);
        prop_assert_eq!(res.multiplicities.iter().sum::<usize>(), 2 * n - 1);

        let other = classify(&germ.flipped(), DEFAULT_TOL);
        prop_assert_eq!(other.model, res.model);
        prop_assert_eq!(other.k, res.k);
        prop_assert_eq!(other.flipped, !res.flipped);
        prop_assert!((other.r.unwrap() - r).abs() < 1e-6);
    }

    #[test]
    fn catalog_ordering(l3 in 0.0f64..0.999, c in -9.0f64..-0.1) {
        let a = (-c).sqrt() / 2.0;
        let es = eigen_structure_from_lambda3(l3 * a, c, None).unwrap();
        let res = constraint_residuals(&es, c);
        prop_assert!(res.ordered);
        prop_assert!(res.max() < 1e-9 * (1.0 + c.abs()).powi(2));
    }
}
