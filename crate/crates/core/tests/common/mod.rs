#![allow(dead_code)]

use ibflow::covariance::MatrixD;
use ibflow::spectral::{Atom, DensityPiece, SpectralMeasure};
use ibflow::IbfModel;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const J1_ZERO: f64 = 3.831705970207512;

fn arb_raw_measure() -> impl Strategy<Value = SpectralMeasure> {
    (
        prop::collection::vec((0.2f64..3.0, 0.1f64..2.0), 0..3),
        prop::option::of((0.2f64..2.0, 0.1f64..1.5, 0.1f64..2.0)),
    )
        .prop_filter("measure needs some mass", |(a, p)| !a.is_empty() || p.is_some())
        .prop_map(|(atoms, piece)| {
            let atoms = atoms
                .into_iter()
                .map(|(location, weight)| Atom { location, weight })
                .collect();
            let density = piece
                .map(|(lo, w, height)| DensityPiece { lo, hi: lo + w, height })
                .into_iter()
                .collect();
            SpectralMeasure::new(atoms, density).unwrap()
        })
}

/// Random non-trivial models in `d ∈ {2, 3}`.
pub fn arb_model() -> impl Strategy<Value = IbfModel> {
    (
        2usize..=3,
        0.0f64..1.0,
        0.0f64..1.0,
        0.0f64..1.0,
        arb_raw_measure(),
        arb_raw_measure(),
    )
        .prop_filter("needs a random part", |(_, _, a, b, _, _)| a + b > 0.05)
        .prop_map(|(d, m0, m1, m2, p, s)| {
            let total = m0 + m1 + m2;
            let (mu1, mu2) = (m1 / total, m2 / total);
            let mu0 = 1.0 - mu1 - mu2;
            IbfModel::normalized(d, [mu0, mu1, mu2], Some(&p), Some(&s)).unwrap()
        })
}

pub fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> MatrixD {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn max_abs(m: &MatrixD) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}
