mod common;

use common::{arb_model, gaussian_vec, random_rotation, rng};
use ibflow::field_sampler::covariance_matrix;
use ibflow::{IbfModel, IncrementSampler, PointCloud};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Empirical second moments of `n` draws, flattened row-major.
fn moments(draws: &[Vec<f64>]) -> DMatrix<f64> {
    let k = draws[0].len();
    let mut m = DMatrix::zeros(k, k);
    for v in draws {
        let v = DVector::from_column_slice(v);
        m += &v * v.transpose();
    }
    m / draws.len() as f64
}

#[test]
fn empirical_covariance_matches_within_five_se() {
    let model = IbfModel::potential_atom(2, 1.0).unwrap();
    let pts = PointCloud::new(2, vec![0.0, 0.0, 0.6, -0.4]).unwrap();
    let sampler = IncrementSampler::build(&model, &pts).unwrap();
    let dt = 0.01;
    let n = 200_000;
    let mut r = rng(17);
    let draws: Vec<Vec<f64>> = (0..n).map(|_| sampler.sample_increment(dt, &mut r)).collect();
    let emp = moments(&draws);
    let c = covariance_matrix(&model, &pts) * dt;
    for i in 0..4 {
        for j in 0..4 {
            let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / n as f64).sqrt();
            assert!(
                (emp[(i, j)] - c[(i, j)]).abs() < 5.0 * se,
                "entry ({i},{j}): {} vs {}",
                emp[(i, j)],
                c[(i, j)]
            );
        }
    }
}

#[test]
fn isotropy_in_law() {
    let model = IbfModel::solenoidal_atom(2, 1.3).unwrap();
    let mut r = rng(5);
    let pts = gaussian_vec(6, 0.8, &mut r);
    let o = random_rotation(2, &mut r);
    let rotated: Vec<f64> = pts
        .chunks(2)
        .flat_map(|p| (&o * DVector::from_column_slice(p)).iter().copied().collect::<Vec<_>>())
        .collect();
    let s1 = IncrementSampler::build(&model, &PointCloud::new(2, pts).unwrap()).unwrap();
    let s2 = IncrementSampler::build(&model, &PointCloud::new(2, rotated).unwrap()).unwrap();
    let n = 100_000;
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v = s1.sample_increment(1.0, &mut r);
            v.chunks(2)
                .flat_map(|p| (&o * DVector::from_column_slice(p)).iter().copied().collect::<Vec<_>>())
                .collect()
        })
        .collect();
    let b: Vec<Vec<f64>> = (0..n).map(|_| s2.sample_increment(1.0, &mut r)).collect();
    let (ma, mb) = (moments(&a), moments(&b));
    for i in 0..6 {
        for j in 0..6 {
            let var = (ma[(i, i)] * ma[(j, j)] + ma[(i, j)].powi(2)) / n as f64;
            let se = (2.0 * var).sqrt();
            assert!((ma[(i, j)] - mb[(i, j)]).abs() < 5.0 * se, "({i},{j})");
        }
    }
}

#[test]
fn increments_scale_like_sqrt_dt() {
    let model = IbfModel::potential_atom(3, 1.0).unwrap();
    let pts = PointCloud::new(3, vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.0]).unwrap();
    let s = IncrementSampler::build(&model, &pts).unwrap();
    let mut r = rng(2);
    let n = 20_000;
    for dt in [1e-4, 1e-2, 1.0] {
        let mean_sq = (0..n)
            .map(|_| s.sample_increment(dt, &mut r).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        // E|ΔM|² = N·d·dt; relative SE ≈ sqrt(2/(n·…)) < 1%
        assert!((mean_sq / (6.0 * dt) - 1.0).abs() < 0.05, "dt={dt}: {mean_sq}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relabeling_permutes_bitwise(model in arb_model(), seed in any::<u64>(), perm_seed in any::<u64>()) {
        let d = model.dim();
        let n = 6;
        let mut r = rng(seed);
        let pts = gaussian_vec(n * d, 1.0, &mut r);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pr = rng(perm_seed);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut pr);
        let mut permuted = vec![0.0; n * d];
        for (new, &old) in perm.iter().enumerate() {
            permuted[new * d..(new + 1) * d].copy_from_slice(&pts[old * d..(old + 1) * d]);
        }
        let a = IncrementSampler::build(&model, &PointCloud::new(d, pts).unwrap()).unwrap();
        let b = IncrementSampler::build(&model, &PointCloud::new(d, permuted).unwrap()).unwrap();
        let ia = a.sample_increment(0.1, &mut rng(seed ^ 1));
        let ib = b.sample_increment(0.1, &mut rng(seed ^ 1));
        for (new, &old) in perm.iter().enumerate() {
            for i in 0..d {
                prop_assert_eq!(ib[new * d + i].to_bits(), ia[old * d + i].to_bits());
            }
        }
    }

    #[test]
    fn factor_reproduces_block_covariance(model in arb_model(), seed in any::<u64>()) {
        let d = model.dim();
        let n = 5;
        let mut r = rng(seed);
        let pts = PointCloud::new(d, gaussian_vec(n * d, 1.0, &mut r)).unwrap();
        let s = IncrementSampler::build(&model, &pts).unwrap();
        let c = covariance_matrix(&model, &pts);
        // diagonal blocks are b(0) = I
        for k in 0..n {
            for i in 0..d {
                for j in 0..d {
                    prop_assert_eq!(c[(k * d + i, k * d + j)], if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        prop_assert!((&c - c.transpose()).iter().all(|v| *v == 0.0));
        if let Some(l) = s.factor() {
            let mut t = DMatrix::<f64>::zeros(n * d, n * d);
            for k in 0..n {
                for i in 0..d {
                    t[(k * d + i, i)] = 1.0;
                    if k > 0 {
                        t[(k * d + i, k * d + i)] = 1.0;
                    }
                }
            }
            let back = &t * l * l.transpose() * t.transpose();
            for a in 0..n {
                for b in 0..n {
                    let (oa, ob) = (s.order()[a], s.order()[b]);
                    for i in 0..d {
                        for j in 0..d {
                            let diff = back[(a * d + i, b * d + j)] - c[(oa * d + i, ob * d + j)];
                            prop_assert!(diff.abs() <= 1e-8 + 4.0 * s.jitter_used());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn psd_probe_agrees_with_sampler_assembly(model in arb_model(), seed in any::<u64>()) {
        let d = model.dim();
        let n = 8;
        let mut r = rng(seed);
        let pts = gaussian_vec(n * d, 1.0, &mut r);
        let dirs = gaussian_vec(n * d, 1.0, &mut r);
        let probe = model.psd_probe(&pts, &dirs).unwrap();
        prop_assert!(probe >= -1e-9);
        let c = covariance_matrix(&model, &PointCloud::new(d, pts).unwrap());
        let v = DVector::from_vec(dirs);
        let quad = (v.transpose() * &c * &v)[(0, 0)];
        prop_assert!((quad - probe).abs() <= 1e-10 * (1.0 + probe.abs()));
    }
}

#[test]
fn duplicated_points_share_increments() {
    let model = IbfModel::potential_atom(2, 1.0).unwrap();
    let pts = PointCloud::new(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
    let s = IncrementSampler::build(&model, &pts).unwrap();
    let mut r = rng(0);
    for _ in 0..1000 {
        let v = s.sample_increment(1.0, &mut r);
        assert!((v[0] - v[2]).abs() <= 5.0 * s.jitter_used().sqrt());
        assert!((v[1] - v[3]).abs() <= 5.0 * s.jitter_used().sqrt());
    }
}

#[test]
fn dimension_mismatch_rejected() {
    let model = IbfModel::potential_atom(3, 1.0).unwrap();
    let pts = PointCloud::new(2, vec![0.0, 0.0]).unwrap();
    assert!(IncrementSampler::build(&model, &pts).is_err());
}
