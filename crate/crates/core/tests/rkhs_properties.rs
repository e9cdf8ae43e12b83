mod common;

use common::{arb_model, gaussian_vec, rng};
use ibflow::rkhs::{
    check_condition, mean_inward_field, sphere_rule, squeeze_functional, DEFAULT_ZERO_TOL,
};
use ibflow::IbfModel;
use proptest::prelude::*;

fn radial(model: &IbfModel, rho: f64, rule: &ibflow::SphereRule, theta: &[f64]) -> f64 {
    let x: Vec<f64> = theta.iter().map(|t| rho * t).collect();
    mean_inward_field(model, rho, rule, &x)
        .iter()
        .zip(theta)
        .map(|(a, b)| a * b)
        .sum()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn radial_component_is_constant_on_sphere(model in arb_model(), rho in 0.3f64..2.0, seed in any::<u64>()) {
        let d = model.dim();
        let rule = sphere_rule(d, if d == 2 { 64 } else { 16 }, None).unwrap();
        let mut r = rng(seed);
        let vals: Vec<f64> = (0..32).map(|_| radial(&model, rho, &rule, &unit(gaussian_vec(d, 1.0, &mut r)))).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(hi - lo < 1e-8, "spread {}", hi - lo);
    }

    #[test]
    fn sign_link_and_inward_property(model in arb_model(), rho in 0.3f64..2.0, seed in any::<u64>()) {
        let d = model.dim();
        let rule = sphere_rule(d, if d == 2 { 128 } else { 24 }, None).unwrap();
        let (lhs, _) = squeeze_functional(&model, rho, &rule).unwrap();
        let cond = check_condition(&model, rho, DEFAULT_ZERO_TOL).unwrap();
        prop_assert!(lhs >= -1e-9);
        prop_assert_eq!(cond.satisfied, lhs > DEFAULT_ZERO_TOL);
        if cond.satisfied {
            let mut r = rng(seed);
            let worst = (0..64)
                .map(|_| radial(&model, rho, &rule, &unit(gaussian_vec(d, 1.0, &mut r))))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(worst < 0.0);
        }
    }
}

#[test]
fn radial_component_equals_minus_functional() {
    let m = IbfModel::potential_atom(3, 1.2).unwrap();
    let rule = sphere_rule(3, 24, None).unwrap();
    let (lhs, rhs) = squeeze_functional(&m, 0.9, &rule).unwrap();
    let v = radial(&m, 0.9, &rule, &[0.0, 0.6, 0.8]);
    assert!((v + lhs).abs() < 1e-10);
    assert!((lhs - rhs).abs() < 1e-8);
}

#[test]
fn degenerate_atom_in_d3() {
    // first zero of J_{3/2}: tan z = z
    let z = ibflow::rkhs::bessel_zeros(ibflow::bessel::Order::from_twice(3).unwrap(), 5.0).unwrap()[0];
    assert!((z.tan() - z).abs() < 1e-7);
    let m = IbfModel::potential_atom(3, z).unwrap();
    assert!(!check_condition(&m, 1.0, DEFAULT_ZERO_TOL).unwrap().satisfied);
    let (lhs, rhs) = squeeze_functional(&m, 1.0, &sphere_rule(3, 48, None).unwrap()).unwrap();
    assert!(lhs.abs() < 1e-6 && rhs.abs() < 1e-10);
}

#[test]
fn mc_sphere_rule_in_high_dimension_is_seeded() {
    let a = sphere_rule(5, 100, Some(3)).unwrap();
    let b = sphere_rule(5, 100, Some(3)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sphere_rule(5, 100, Some(4)).unwrap());
}
