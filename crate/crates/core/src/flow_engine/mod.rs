//! Euler integration of the Kunita flow on point clouds, the deterministic
//! RK4 flow of a drift field, and the Monte-Carlo experiments built on them.

mod experiments;
mod lyapunov;
mod observables;
mod report;

pub use experiments::{
    length_decay_experiment, squeeze_experiment, tilted_tracking_error, tracer_shell,
    LengthDecayParams, SqueezeMode, SqueezeParams, TrackingParams, TrackingResult,
};
pub use lyapunov::{lyapunov_estimate, LyapunovParams, LyapunovResult};
pub use observables::{containment, curve_length, diameter, encloses_origin, segment_clear_of_ball};
pub use report::{wilson_interval, Aggregate, ExperimentOutput, ExperimentReport, PathRecord, PathSummary};

use rand::Rng;

use crate::covariance::IbfModel;
use crate::error::{Error, Result};
use crate::field_sampler::{BoundDrift, IncrementSampler};

/// Default number of steps between recorded snapshots.
pub const DEFAULT_STRIDE: usize = 10;

/// Ordered tracers in `ℝ^d` with a time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    d: usize,
    positions: Vec<f64>,
    time: f64,
}

impl PointCloud {
    /// Flat `N·d` coordinates at time 0.
    pub fn new(d: usize, positions: Vec<f64>) -> Result<Self> {
        if d == 0 || !positions.len().is_multiple_of(d) {
            return Err(Error::param(format!(
                "point cloud needs a multiple of {d} coordinates, got {}",
                positions.len()
            )));
        }
        Ok(Self {
            d,
            positions,
            time: 0.0,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::param("points must be non-empty and share one dimension"));
        }
        Self::new(d, points.concat())
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.positions.chunks(self.d)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|v| v.is_finite())
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut out = self.clone();
        for p in out.positions.chunks_mut(self.d) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        out
    }
}

/// A deterministic vector field on `ℝ^d`.
pub trait VectorField: Sync {
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// True when the field is identically zero, letting integrators skip it.
    fn is_zero(&self) -> bool {
        false
    }
}

impl VectorField for BoundDrift<'_> {
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        BoundDrift::eval_into(self, x, out)
    }

    fn is_zero(&self) -> bool {
        self.field().is_none()
    }
}

/// The zero field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl VectorField for ZeroField {
    fn eval_into(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `Σ c_k V_k(x)`.
pub struct Superposition<'a> {
    terms: Vec<(f64, &'a dyn VectorField)>,
}

impl<'a> Superposition<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn VectorField)>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|(c, f)| *c != 0.0 && !f.is_zero())
            .collect();
        Self { terms }
    }
}

impl VectorField for Superposition<'_> {
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for (c, f) in &self.terms {
            f.eval_into(x, &mut buf)?;
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += c * b;
            }
        }
        Ok(())
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Step end times from `t0` to `t1`, the last one landing exactly on `t1`.
pub fn time_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::param(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= t1 - t0) {
        return Err(Error::param(format!(
            "dt must lie in (0, t1 - t0], got {dt}"
        )));
    }
    let span = t1 - t0;
    let full = (span / dt + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (1..=full).map(|k| t0 + k as f64 * dt).collect();
    match grid.last_mut() {
        Some(last) if (t1 - *last).abs() <= 1e-9 * dt => *last = t1,
        _ => grid.push(t1),
    }
    Ok(grid)
}

/// One Euler step `x ← x + σ·ΔM(x) + v(x)·h` for every tracer.
pub struct Euler<'a> {
    model: &'a IbfModel,
    drift: &'a dyn VectorField,
    noise_scale: f64,
}

impl<'a> Euler<'a> {
    /// `noise_scale = 0` switches the random field off.
    pub fn new(model: &'a IbfModel, drift: &'a dyn VectorField, noise_scale: f64) -> Self {
        Self {
            model,
            drift,
            noise_scale,
        }
    }

    /// Advance `cloud` by `h`; returns the sampler jitter used.
    pub fn step<R: Rng + ?Sized>(&self, cloud: &mut PointCloud, h: f64, rng: &mut R) -> Result<f64> {
        let d = cloud.dim();
        let mut update = vec![0.0; cloud.positions.len()];
        if !self.drift.is_zero() {
            for (p, u) in cloud.points().zip(update.chunks_mut(d)) {
                self.drift.eval_into(p, u)?;
                for v in u.iter_mut() {
                    *v *= h;
                }
            }
        }
        let mut jitter = 0.0;
        if self.noise_scale != 0.0 {
            let sampler = IncrementSampler::build(self.model, cloud)?;
            jitter = sampler.jitter_used();
            let inc = sampler.sample_increment(h, rng);
            for (u, m) in update.iter_mut().zip(&inc) {
                *u += self.noise_scale * m;
            }
        }
        for (x, u) in cloud.positions.iter_mut().zip(&update) {
            *x += u;
        }
        cloud.time += h;
        if !cloud.is_finite() {
            return Err(Error::Divergence { time: cloud.time });
        }
        Ok(jitter)
    }
}

/// Snapshot behaviour of [`euler_flow`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Multiplier on the random increments; 0 gives the drift ODE.
    pub noise_scale: f64,
    /// Record every `stride`-th step (the initial and final states always).
    pub stride: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            noise_scale: 1.0,
            stride: DEFAULT_STRIDE,
        }
    }
}

/// Recorded states of one Euler run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<PointCloud>,
    pub jitter_max: f64,
}

/// Integrate from `t0` to `t1`, calling `observe` on the initial state, every
/// `stride`-th step and the final state. Returns the largest jitter used.
pub fn euler_flow_observe<R, F>(
    model: &IbfModel,
    cloud: &PointCloud,
    t0: f64,
    t1: f64,
    dt: f64,
    drift: &dyn VectorField,
    options: FlowOptions,
    rng: &mut R,
    mut observe: F,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&PointCloud) -> Result<()>,
{
    if cloud.dim() != model.dim() {
        return Err(Error::param("point cloud dimension does not match the model"));
    }
    if cloud.is_empty() || !cloud.is_finite() {
        return Err(Error::param("point cloud must be non-empty and finite"));
    }
    let stride = options.stride.max(1);
    let grid = time_grid(t0, t1, dt)?;
    let stepper = Euler::new(model, drift, options.noise_scale);
    let mut state = cloud.clone().at_time(t0);
    observe(&state)?;
    let mut jitter_max: f64 = 0.0;
    let mut prev = t0;
    for (k, &t) in grid.iter().enumerate() {
        jitter_max = jitter_max.max(stepper.step(&mut state, t - prev, rng)?);
        state.time = t;
        prev = t;
        if (k + 1) % stride == 0 || k + 1 == grid.len() {
            observe(&state)?;
        }
    }
    Ok(jitter_max)
}

/// Euler trajectory of a point cloud with snapshots every `options.stride` steps.
pub fn euler_flow<R: Rng + ?Sized>(
    model: &IbfModel,
    cloud: &PointCloud,
    t0: f64,
    t1: f64,
    dt: f64,
    drift: &dyn VectorField,
    options: FlowOptions,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let jitter_max = euler_flow_observe(model, cloud, t0, t1, dt, drift, options, rng, |c| {
        snapshots.push(c.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        snapshots,
        jitter_max,
    })
}

/// Classical RK4 for `ẋ = V(x)` on `[0, t1]`; returns `(t, x)` at every step
/// including `t = 0`.
pub fn ode_flow(
    drift: &dyn VectorField,
    x0: &[f64],
    t1: f64,
    dt: f64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let grid = time_grid(0.0, t1, dt)?;
    let d = x0.len();
    let mut out = Vec::with_capacity(grid.len() + 1);
    let mut x = x0.to_vec();
    out.push((0.0, x.clone()));
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let mut prev = 0.0;
    for &t in &grid {
        let h = t - prev;
        drift.eval_into(&x, &mut k1)?;
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        drift.eval_into(&tmp, &mut k2)?;
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        drift.eval_into(&tmp, &mut k3)?;
        for i in 0..d {
            tmp[i] = x[i] + h * k3[i];
        }
        drift.eval_into(&tmp, &mut k4)?;
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push((t, x.clone()));
        prev = t;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_sampler::DriftField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_lands_on_end() {
        let g = time_grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = time_grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 10);
        assert!(time_grid(0.0, 1.0, 2.0).is_err());
        assert!(time_grid(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn rigid_translation_keeps_diameter() {
        let m = IbfModel::trivial_translation(2).unwrap();
        let c = PointCloud::new(2, vec![0.0, 0.0, 1.0, 0.5, -0.3, 2.0]).unwrap();
        let d0 = diameter(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tr = euler_flow(&m, &c, 0.0, 1.0, 0.01, &ZeroField, FlowOptions::default(), &mut rng)
            .unwrap();
        assert_eq!(tr.snapshots.len(), 11);
        for s in &tr.snapshots {
            assert!((diameter(s) - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_linear_decay() {
        let m = IbfModel::trivial_translation(2).unwrap();
        let field = DriftField::Linear {
            matrix: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
        };
        let bound = field.bind(&m).unwrap();
        let c = PointCloud::new(2, vec![1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = FlowOptions {
            noise_scale: 0.0,
            stride: 1,
        };
        let tr = euler_flow(&m, &c, 0.0, 1.0, 1e-3, &bound, opts, &mut rng).unwrap();
        let x = tr.snapshots.last().unwrap().point(0)[0];
        assert!((x - (-1f64).exp()).abs() < 1e-3);

        let path = ode_flow(&bound, &[1.0, 0.0], 1.0, 1e-3).unwrap();
        let (t, x) = path.last().unwrap();
        assert_eq!(*t, 1.0);
        assert!((x[0] - (-1f64).exp()).abs() < 1e-8 && x[1] == 0.0);
    }

    #[test]
    fn zero_field_ode_is_constant() {
        let path = ode_flow(&ZeroField, &[0.3, -2.0], 1.0, 0.1).unwrap();
        assert!(path.iter().all(|(_, x)| x == &vec![0.3, -2.0]));
    }
}
