mod common;

use common::{arb_model, gaussian_vec, max_abs, random_rotation, rng};
use ibflow::bessel::{j, Order};
use ibflow::covariance::Kind;
use ibflow::IbfModel;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scalars_are_correlations(model in arb_model()) {
        for i in 0..=80 {
            let s = 0.25 * i as f64;
            for kind in Kind::ALL {
                if let Ok(v) = model.b_scalar(kind, s) {
                    prop_assert!(v.abs() <= 1.0 + 1e-9, "{kind} at {s}: {v}");
                }
            }
            let p = model.radial_parts(s);
            prop_assert!(p.b_l.abs() <= 1.0 + 1e-9 && p.b_n.abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn rotation_equivariance(model in arb_model(), seed in any::<u64>()) {
        let d = model.dim();
        let mut r = rng(seed);
        for _ in 0..5 {
            let x = gaussian_vec(d, 1.5, &mut r);
            let o = random_rotation(d, &mut r);
            let ox: Vec<f64> = (&o * nalgebra::DVector::from_vec(x.clone())).iter().copied().collect();
            let lhs = model.covariance_tensor(&x);
            let rhs = o.transpose() * model.covariance_tensor(&ox) * &o;
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-10);
        }
    }

    #[test]
    fn even_and_symmetric(model in arb_model(), seed in any::<u64>()) {
        let d = model.dim();
        let mut r = rng(seed);
        let x = gaussian_vec(d, 2.0, &mut r);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let b = model.covariance_tensor(&x);
        prop_assert!(max_abs(&(&b - b.transpose())) <= 1e-12);
        prop_assert!(max_abs(&(&b - model.covariance_tensor(&neg))) <= 1e-12);
    }

    #[test]
    fn second_difference_matches_beta(model in arb_model()) {
        let d = model.dim();
        let c = model.flow_constants().unwrap();
        let h = 1e-3;
        let mut x = vec![0.0; d];
        x[0] = h;
        let b = model.covariance_tensor(&x);
        // b is even, so the central second difference is 2(1 − b(h e))/h²
        let along = 2.0 * (1.0 - b[(0, 0)]) / (h * h);
        let across = 2.0 * (1.0 - b[(1, 1)]) / (h * h);
        prop_assert!((along - c.beta_l).abs() <= 1e-4 * c.beta_l, "{along} vs {}", c.beta_l);
        prop_assert!((across - c.beta_n).abs() <= 1e-4 * c.beta_n, "{across} vs {}", c.beta_n);
    }

    #[test]
    fn psd_on_random_configurations(model in arb_model(), seed in any::<u64>()) {
        let d = model.dim();
        let mut r = rng(seed);
        let n = 12;
        let pts = gaussian_vec(n * d, 1.0, &mut r);
        let dirs = gaussian_vec(n * d, 1.0, &mut r);
        prop_assert!(model.psd_probe(&pts, &dirs).unwrap() >= -1e-9);
    }

    #[test]
    fn incompressibility_iff_no_potential_part(model in arb_model()) {
        let c = model.flow_constants().unwrap();
        let df = model.dim() as f64;
        let gap = c.compressibility(model.dim());
        prop_assert!((gap - ((df + 1.0) * c.beta_l - (df - 1.0) * c.beta_n)).abs() < 1e-12);
        if model.mu1() == 0.0 {
            prop_assert!(gap.abs() < 1e-10);
        } else {
            prop_assert!(gap > 0.0);
        }
    }

    #[test]
    fn bessel_recurrence(twice in 2u32..=18, x in 0.5f64..40.0) {
        let nu = Order::from_twice(twice).unwrap();
        let lo = j(nu.lower().unwrap(), x);
        let hi = j(nu.raise().unwrap(), x);
        let mid = 2.0 * nu.value() / x * j(nu, x);
        let scale = lo.abs().max(hi.abs()).max(mid.abs());
        prop_assert!((lo + hi - mid).abs() <= 1e-9 * scale, "nu={} x={x}", nu.value());
    }
}

#[test]
fn pn_zero_at_bessel_zero() {
    let m = IbfModel::potential_atom(2, 1.0).unwrap();
    assert!(m.b_scalar(Kind::PN, common::J1_ZERO).unwrap().abs() < 1e-8);
}

#[test]
fn d4_potential_atom_has_zero_exponent() {
    let c = IbfModel::potential_atom(4, 1.0).unwrap().flow_constants().unwrap();
    assert!((c.beta_l - 0.5).abs() < 1e-15);
    assert!((c.beta_n - 1.0 / 6.0).abs() < 1e-15);
    assert!(c.lambda.abs() < 1e-15);
}
