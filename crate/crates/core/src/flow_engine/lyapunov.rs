use rand::Rng;
use rand_distr::StandardNormal;

use super::report::mean_se;
use super::{time_grid, PointCloud, VectorField};
use crate::covariance::IbfModel;
use crate::error::{Error, Result};
use crate::field_sampler::IncrementSampler;
use crate::parallel::{map_paths, path_rng, path_seed};

/// Pairs closer than this abort the estimate.
pub const UNDERFLOW_SEPARATION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovParams {
    pub t: f64,
    pub dt: f64,
    pub n_pairs: usize,
    pub renorm_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovResult {
    /// `(1/T) Σ log(|Δ|/ε)` per pair.
    pub estimates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub estimate: f64,
    pub standard_error: f64,
    pub jitter_max: f64,
}

/// Top Lyapunov exponent from tracer pairs `(x, x + εu)` driven by the same
/// field and renormalized to separation `ε` whenever it leaves `[ε/10, 10ε]`.
pub fn lyapunov_estimate(
    model: &IbfModel,
    params: LyapunovParams,
    drift: &dyn VectorField,
    seed: u64,
) -> Result<LyapunovResult> {
    let LyapunovParams {
        t,
        dt,
        n_pairs,
        renorm_eps: eps,
    } = params;
    if !(eps > 1e-8 && eps < 1e-2) {
        return Err(Error::param(format!("renorm_eps must lie in (1e-8, 1e-2), got {eps}")));
    }
    if n_pairs == 0 {
        return Err(Error::param("need at least one pair"));
    }
    let grid = time_grid(0.0, t, dt)?;
    let d = model.dim();
    let per_pair = map_paths(n_pairs, |k| {
        let mut rng = path_rng(seed, k);
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v *= eps / norm);
        let mut base = vec![0.0; d];
        let mut delta = u;
        let mut log_sum = 0.0;
        let mut jitter_max: f64 = 0.0;
        let mut vb = vec![0.0; d];
        let mut vp = vec![0.0; d];
        let mut prev = 0.0;
        for &tk in &grid {
            let h = tk - prev;
            prev = tk;
            let mut pair = base.clone();
            pair.extend(base.iter().zip(&delta).map(|(a, b)| a + b));
            let cloud = PointCloud::new(d, pair)?;
            let sampler = IncrementSampler::build(model, &cloud)?;
            jitter_max = jitter_max.max(sampler.jitter_used());
            let inc = sampler.sample_split(h, &mut rng);
            if !drift.is_zero() {
                drift.eval_into(cloud.point(0), &mut vb)?;
                drift.eval_into(cloud.point(1), &mut vp)?;
            }
            for i in 0..d {
                let rel = inc.relative[d + i] - inc.relative[i];
                base[i] += inc.common[i] + inc.relative[i] + vb[i] * h;
                delta[i] += rel + (vp[i] - vb[i]) * h;
            }
            let sep = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(sep >= UNDERFLOW_SEPARATION) {
                return Err(Error::Underflow {
                    pair: k,
                    separation: sep,
                });
            }
            if sep < 0.1 * eps || sep > 10.0 * eps {
                log_sum += (sep / eps).ln();
                delta.iter_mut().for_each(|v| *v *= eps / sep);
            }
        }
        let sep = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        log_sum += (sep / eps).ln();
        Ok((log_sum / t, jitter_max))
    })?;
    let estimates: Vec<f64> = per_pair.iter().map(|p| p.0).collect();
    let (estimate, standard_error) = mean_se(&estimates);
    Ok(LyapunovResult {
        seeds: (0..n_pairs).map(|k| path_seed(seed, k)).collect(),
        jitter_max: per_pair.iter().map(|p| p.1).fold(0.0, f64::max),
        estimates,
        estimate,
        standard_error,
    })
}
