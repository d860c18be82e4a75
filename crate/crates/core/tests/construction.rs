use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use nalgebra::DVector;
use proptest::prelude::*;

use chyper::construction::*;
use chyper::linalg::project;
use chyper::model::apply_j;
use chyper::{Error, ModelParams};

fn params(n: usize, c: f64) -> ModelParams {
    ModelParams::new(n, c).unwrap()
}

/// (n, k, phi) with phi = π/3 only for even k.
fn configs() -> impl Strategy<Value = (usize, usize, f64, f64)> {
    (2usize..=5, prop_oneof![Just(-1.0), Just(-4.0), -9.0f64..-0.1])
        .prop_flat_map(|(n, c)| (Just(n), 1..n, Just(c), any::<bool>()))
        .prop_map(|(n, k, c, third)| (n, k, c, if third && k % 2 == 0 { FRAC_PI_3 } else { FRAC_PI_2 }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subspaces_have_constant_angle((n, k, c, phi) in configs()) {
        let s = constant_kahler_angle_subspace(params(n, c), k, phi).unwrap();
        prop_assert_eq!(s.basis.len(), k);
        prop_assert!(s.angle_deviation(17, 1000) < 1e-9);
        for (i, x) in s.basis.iter().enumerate() {
            for (j, y) in s.basis.iter().enumerate() {
                prop_assert!((x.dot(y) - (i == j) as u8 as f64).abs() < 1e-12);
            }
            // inside g_α
            prop_assert!(x[0] == 0.0 && x[1] == 0.0);
        }
    }

    #[test]
    fn spec_is_a_subalgebra_complementary_to_the_normal((n, k, c, phi) in configs()) {
        let spec = build_submanifold(params(n, c), k, phi).unwrap();
        prop_assert_eq!(spec.tangent.len(), 2 * n - k);
        prop_assert!(spec.closure_residual() < 1e-12);
        for t in &spec.tangent {
            for w in spec.normal() {
                prop_assert!(t.dot(w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orbits_are_minimal_ruled_and_rigid((n, k, c, phi) in configs()) {
        let spec = build_submanifold(params(n, c), k, phi).unwrap();
        let ii = orbit_second_fundamental_form(&spec);
        prop_assert_eq!(ii.tensor.len(), k);
        prop_assert!(ii.symmetry_residual() < 1e-14);
        prop_assert!(ii.trace().iter().all(|t| t.abs() < 1e-12));
        let report = rigidity_form_check(&ii, &spec);
        prop_assert!(report.pass && report.residual < 1e-12, "{:?}", report);
        prop_assert!((report.entry - phi.sin() * (-c).sqrt() / 2.0).abs() < 1e-15);

        // II vanishes on the part of the tangent space orthogonal to every Pξ
        let p: Vec<DVector<f64>> = spec.normal().iter().map(|xi| spec.tangent_part_of_j(xi)).collect();
        let p = chyper::linalg::gram_schmidt(&p, 1e-9);
        let model = spec.model();
        let reduced: Vec<DVector<f64>> = spec.tangent.iter().map(|t| t - project(t, &p)).collect();
        for x in &reduced {
            for y in &reduced {
                let v = model.koszul(x, y);
                for xi in spec.normal() {
                    prop_assert!(v.dot(xi).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn lohnherr_entry() {
    // c = −4, k = 1: II(Z, Jξ) = ξ and nothing else
    let spec = build_submanifold(params(2, -4.0), 1, FRAC_PI_2).unwrap();
    let model = spec.model();
    let xi = &spec.normal()[0];
    let jxi = apply_j(xi);
    assert!((model.koszul(&spec.zvec, &jxi).dot(xi) - 1.0).abs() < 1e-15);
    let ii = orbit_second_fundamental_form(&spec);
    let nonzero = ii.tensor[0].iter().filter(|v| v.abs() > 1e-15).count();
    assert_eq!(nonzero, 2);
}

#[test]
fn rigidity_detects_perturbation() {
    let spec = build_submanifold(params(3, -4.0), 2, FRAC_PI_3).unwrap();
    let mut ii = orbit_second_fundamental_form(&spec);
    let report = rigidity_form_check(&ii, &spec);
    assert!(report.pass);
    assert!((report.entry - 0.8660254037844386).abs() < 1e-12);
    ii.tensor[1][(2, 3)] += 1e-3;
    ii.tensor[1][(3, 2)] += 1e-3;
    let bad = rigidity_form_check(&ii, &spec);
    assert!(!bad.pass);
    assert!((bad.residual - 1e-3).abs() < 1e-12);
    let mut short = orbit_second_fundamental_form(&spec);
    short.tensor.pop();
    assert!(!rigidity_form_check(&short, &spec).pass);
}

#[test]
fn kahler_angle_cases() {
    let d = 8;
    let unit = |i: usize| DVector::from_fn(d, |j, _| (i == j) as u8 as f64);
    let real = [unit(2), unit(4)];
    assert!((kahler_angle(&unit(2), &real).unwrap() - FRAC_PI_2).abs() < 1e-15);
    let complex = [unit(2), unit(3)];
    assert!(kahler_angle(&(unit(2) + unit(3)), &complex).unwrap().abs() < 1e-7);
    let s = constant_kahler_angle_subspace(params(4, -4.0), 2, FRAC_PI_3).unwrap();
    assert!((kahler_angle(&unit(2), &s.basis).unwrap() - FRAC_PI_3).abs() < 1e-12);
    assert_eq!(kahler_angle(&DVector::zeros(d), &real), Err(Error::ZeroVector));
    assert!(matches!(kahler_angle(&unit(6), &real), Err(Error::NotInSubspace(_))));
}

#[test]
fn construction_rejects_bad_inputs() {
    assert!(matches!(
        constant_kahler_angle_subspace(params(4, -4.0), 3, FRAC_PI_3),
        Err(Error::OddDimensionNonReal { k: 3, .. })
    ));
    assert!(matches!(build_submanifold(params(3, -4.0), 3, FRAC_PI_2), Err(Error::DimensionTooLarge { k: 3, max: 2 })));
    assert!(build_submanifold(params(3, -4.0), 0, FRAC_PI_2).is_err());
    assert!(matches!(build_submanifold(params(3, -4.0), 2, 0.0), Err(Error::AngleOutOfRange(_))));
    assert!(matches!(build_submanifold(params(3, -4.0), 2, 2.0), Err(Error::AngleOutOfRange(_))));
    assert!(matches!(build_submanifold(params(3, 4.0), 2, FRAC_PI_2), Err(Error::RequiresNegativeCurvature(_))));
}

#[test]
fn spec_json_fields() {
    let spec = build_submanifold(params(3, -4.0), 2, FRAC_PI_2).unwrap();
    let v = spec.to_json();
    assert_eq!(v["n"], 3);
    assert_eq!(v["k"], 2);
    assert_eq!(v["c"], -4.0);
    assert_eq!(v["tangent_basis"].as_array().unwrap().len(), 4);
    assert_eq!(v["normal_basis"].as_array().unwrap().len(), 2);
    assert_eq!(v["J"].as_array().unwrap().len(), 6);
    let back: SubmanifoldSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
}
