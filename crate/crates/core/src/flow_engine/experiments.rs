use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::observables::{containment, curve_length, diameter, encloses_origin, segment_clear_of_ball};
use super::report::{mean_se, ExperimentOutput, ExperimentReport, PathRecord, PathSummary};
use super::{euler_flow_observe, ode_flow, FlowOptions, PointCloud, Superposition, VectorField};
use crate::covariance::IbfModel;
use crate::error::{Error, Result};
use crate::parallel::{map_paths, path_rng, path_seed};

/// Slack when deciding whether a snapshot time lies in `[T1, T2]`.
const WINDOW_EPS: f64 = 1e-12;

/// `n` points on the sphere of radius `radius`: equal angles for `d = 2`, a
/// Fibonacci lattice for `d = 3`, seeded Gaussian directions above.
pub fn tracer_shell(d: usize, radius: f64, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 || d < 2 {
        return Err(Error::param("tracer shell needs d >= 2 and at least one tracer"));
    }
    let mut pos = Vec::with_capacity(n * d);
    match d {
        2 => {
            for k in 0..n {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                pos.extend([radius * a.cos(), radius * a.sin()]);
            }
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for k in 0..n {
                let z = 1.0 - (2 * k + 1) as f64 / n as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let a = golden * k as f64;
                pos.extend([radius * r * a.cos(), radius * r * a.sin(), radius * z]);
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = vec![0.0; d];
            for _ in 0..n {
                loop {
                    v.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        pos.extend(v.iter().map(|x| radius * x / norm));
                        break;
                    }
                }
            }
        }
    }
    PointCloud::new(d, pos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeMode {
    /// `φ_t(B(0,R+δ)) ⊂ B(0,R−δ)` on `[T1, T2]`.
    Squeeze,
    /// `B(0,R+δ) ⊂ φ_t(B(0,R−δ))` on `[T1, T2]`.
    Expand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    pub radius: f64,
    pub delta: f64,
    pub t1: f64,
    pub t2: f64,
    pub n_boundary: usize,
    pub dt: f64,
    pub n_paths: usize,
    pub stride: usize,
    pub mode: SqueezeMode,
}

impl SqueezeParams {
    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.delta > 0.0 && self.delta < self.radius) {
            return Err(Error::param("need 0 < delta < R"));
        }
        if !(self.t1 > 0.0 && self.t2 > self.t1) {
            return Err(Error::param("need 0 < T1 < T2"));
        }
        if self.n_boundary < 8 {
            return Err(Error::param("n_boundary must be at least 8"));
        }
        if self.n_paths == 0 {
            return Err(Error::param("n_paths must be positive"));
        }
        Ok(())
    }
}

/// Frequency of the squeezing (or expansion) event over independent paths.
pub fn squeeze_experiment(
    model: &IbfModel,
    params: SqueezeParams,
    drift: &dyn VectorField,
    seed: u64,
) -> Result<ExperimentOutput> {
    params.validate()?;
    let d = model.dim();
    let (start_r, target_r) = match params.mode {
        SqueezeMode::Squeeze => (params.radius + params.delta, params.radius - params.delta),
        SqueezeMode::Expand => (params.radius - params.delta, params.radius + params.delta),
    };
    let shell = tracer_shell(d, start_r, params.n_boundary, seed)?;
    let n_shell = shell.len();
    // expansion in d ≥ 3 also tracks the image of the center
    let center_tracked = params.mode == SqueezeMode::Expand && d > 2;
    let start = if center_tracked {
        let mut pos = shell.positions().to_vec();
        pos.extend(std::iter::repeat_n(0.0, d));
        PointCloud::new(d, pos)?
    } else {
        shell
    };
    let origin = vec![0.0; d];
    let options = FlowOptions {
        noise_scale: 1.0,
        stride: params.stride,
    };

    let records = map_paths(params.n_paths, |k| {
        let mut rng = path_rng(seed, k);
        let mut times = Vec::new();
        let mut diameters = Vec::new();
        let mut flags = Vec::new();
        let jitter_max = euler_flow_observe(
            model,
            &start,
            0.0,
            params.t2,
            params.dt,
            drift,
            options,
            &mut rng,
            |c| {
                let shell_only = PointCloud::new(d, c.positions()[..n_shell * d].to_vec())?;
                let event = match params.mode {
                    SqueezeMode::Squeeze => containment(&shell_only, target_r, &origin),
                    SqueezeMode::Expand => expansion_event(c, n_shell, target_r, center_tracked),
                };
                times.push(c.time());
                diameters.push(diameter(&shell_only));
                flags.push(event);
                Ok(())
            },
        )?;
        Ok(PathRecord {
            path: k,
            seed: path_seed(seed, k),
            times,
            diameters,
            lengths: None,
            contained: Some(flags),
            jitter_max,
        })
    })?;

    let mut summaries = Vec::with_capacity(records.len());
    for r in &records {
        let flags = r.contained.as_deref().unwrap_or_default();
        let window: Vec<bool> = r
            .times
            .iter()
            .zip(flags)
            .filter(|(t, _)| **t >= params.t1 - WINDOW_EPS && **t <= params.t2 + WINDOW_EPS)
            .map(|(_, f)| *f)
            .collect();
        if window.is_empty() {
            return Err(Error::param(
                "no snapshot falls inside [T1, T2]; reduce stride or dt",
            ));
        }
        let success = window.iter().all(|&f| f);
        summaries.push(PathSummary {
            path: r.path,
            seed: r.seed,
            value: if success { 1.0 } else { 0.0 },
            success: Some(success),
            jitter_max: r.jitter_max,
        });
    }
    let command = match params.mode {
        SqueezeMode::Squeeze => "squeeze",
        SqueezeMode::Expand => "expand",
    };
    let mut report = ExperimentReport::new(command, summaries);
    report.aggregate.extra.insert("n_boundary".into(), params.n_boundary as f64);
    report.aggregate.extra.insert("jitter_max".into(), report.jitter_max());
    report.notes.push(format!(
        "event checked on {} boundary tracers at recorded snapshots (stride {}); \
         a tracer estimate of the continuum event",
        params.n_boundary,
        params.stride.max(1)
    ));
    if params.mode == SqueezeMode::Expand {
        report.notes.push(if center_tracked {
            "expansion: all shell tracers outside B(0,R+delta) and the image of the center inside it".into()
        } else {
            "expansion: every polygon edge outside B(0,R+delta) and non-zero winding about the origin".into()
        });
    }
    Ok(ExperimentOutput { report, records })
}

fn expansion_event(c: &PointCloud, n_shell: usize, r: f64, center_tracked: bool) -> bool {
    let d = c.dim();
    let r2 = r * r;
    let norm2 = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>();
    if (0..n_shell).any(|i| norm2(c.point(i)) <= r2) {
        return false;
    }
    if center_tracked {
        return norm2(c.point(n_shell)) < r2;
    }
    debug_assert_eq!(d, 2);
    let edges_clear = (0..n_shell).all(|i| segment_clear_of_ball(c.point(i), c.point((i + 1) % n_shell), r));
    edges_clear && encloses_origin(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingParams {
    /// Tilt strength `c ≥ 1`.
    pub c: f64,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    /// `false` switches the random field off (the `c → ∞` limit).
    pub noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub c: f64,
    /// `sup_t max_x |Y_t^c(x) − ξ_t(x)|` per path.
    pub deviations: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub standard_error: f64,
    pub jitter_max: f64,
}

/// Euler run of `dY = V(Y)dt + c^{−1/2} M(dt, Y) + c^{−1} v(Y) dt` against
/// the RK4 flow `ξ` of `V` from the same starting points.
pub fn tilted_tracking_error(
    model: &IbfModel,
    field: &dyn VectorField,
    model_drift: &dyn VectorField,
    x0: &PointCloud,
    params: TrackingParams,
    seed: u64,
) -> Result<TrackingResult> {
    let TrackingParams {
        c,
        t,
        dt,
        n_paths,
        noise,
    } = params;
    if !(c.is_finite() && c >= 1.0) {
        return Err(Error::param(format!("tilt c must be >= 1, got {c}")));
    }
    if n_paths == 0 {
        return Err(Error::param("n_paths must be positive"));
    }
    let d = x0.dim();
    let mut reference: Vec<Vec<f64>> = Vec::new();
    for p in x0.points() {
        let path = ode_flow(field, p, t, dt)?;
        if reference.is_empty() {
            reference = vec![Vec::with_capacity(x0.len() * d); path.len()];
        }
        for (slot, (_, x)) in reference.iter_mut().zip(path) {
            slot.extend(x);
        }
    }
    let drift = Superposition::new(vec![(1.0, field), (1.0 / c, model_drift)]);
    let options = FlowOptions {
        noise_scale: if noise { c.powf(-0.5) } else { 0.0 },
        stride: 1,
    };
    let per_path = map_paths(n_paths, |k| {
        let mut rng = path_rng(seed, k);
        let mut step = 0usize;
        let mut sup: f64 = 0.0;
        let jitter = euler_flow_observe(model, x0, 0.0, t, dt, &drift, options, &mut rng, |cloud| {
            let xi = &reference[step];
            for (y, r) in cloud.positions().chunks(d).zip(xi.chunks(d)) {
                let dev = y.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                sup = sup.max(dev);
            }
            step += 1;
            Ok(())
        })?;
        Ok((sup, jitter))
    })?;
    let deviations: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let (mean, standard_error) = mean_se(&deviations);
    Ok(TrackingResult {
        c,
        seeds: (0..n_paths).map(|k| path_seed(seed, k)).collect(),
        jitter_max: per_path.iter().map(|p| p.1).fold(0.0, f64::max),
        deviations,
        mean,
        standard_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthDecayParams {
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub stride: usize,
    /// Treat the polyline as closed.
    pub closed: bool,
    /// A path counts as shrinking when `diam(T) < diam(0) / shrink_factor`.
    pub shrink_factor: f64,
}

/// Curve length and diameter along independent paths, with terminal growth
/// rates `(1/T) log(L_T / L_0)`.
pub fn length_decay_experiment(
    model: &IbfModel,
    curve: &PointCloud,
    params: LengthDecayParams,
    drift: &dyn VectorField,
    seed: u64,
) -> Result<ExperimentOutput> {
    if curve.len() < 2 {
        return Err(Error::param("curve needs at least two vertices"));
    }
    if params.n_paths == 0 {
        return Err(Error::param("n_paths must be positive"));
    }
    if !(params.shrink_factor > 1.0) {
        return Err(Error::param("shrink_factor must exceed 1"));
    }
    let l0 = curve_length(curve, params.closed);
    if !(l0 > 0.0) {
        return Err(Error::param("initial curve has zero length"));
    }
    let options = FlowOptions {
        noise_scale: 1.0,
        stride: params.stride,
    };
    let records = map_paths(params.n_paths, |k| {
        let mut rng = path_rng(seed, k);
        let mut times = Vec::new();
        let mut diameters = Vec::new();
        let mut lengths = Vec::new();
        let jitter_max =
            euler_flow_observe(model, curve, 0.0, params.t, params.dt, drift, options, &mut rng, |c| {
                times.push(c.time());
                diameters.push(diameter(c));
                lengths.push(curve_length(c, params.closed));
                Ok(())
            })?;
        Ok(PathRecord {
            path: k,
            seed: path_seed(seed, k),
            times,
            diameters,
            lengths: Some(lengths),
            contained: None,
            jitter_max,
        })
    })?;

    let diam0 = diameter(curve);
    let mut summaries = Vec::with_capacity(records.len());
    for r in &records {
        let lengths = r.lengths.as_deref().unwrap_or_default();
        let growth = (lengths[lengths.len() - 1] / l0).ln() / params.t;
        let shrinking = r.diameters[r.diameters.len() - 1] < diam0 / params.shrink_factor;
        summaries.push(PathSummary {
            path: r.path,
            seed: r.seed,
            value: growth,
            success: Some(shrinking),
            jitter_max: r.jitter_max,
        });
    }
    let shrinking: Vec<f64> = summaries
        .iter()
        .filter(|s| s.success == Some(true))
        .map(|s| s.value)
        .collect();
    let (sm, sse) = mean_se(&shrinking);
    let mut report = ExperimentReport::new("length-decay", summaries);
    let extra = &mut report.aggregate.extra;
    extra.insert("initial_length".into(), l0);
    extra.insert("initial_diameter".into(), diam0);
    extra.insert("shrinking_mean_growth".into(), sm);
    extra.insert("shrinking_se_growth".into(), sse);
    extra.insert(
        "max_growth".into(),
        report.paths.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max),
    );
    extra.insert("jitter_max".into(), report.paths.iter().map(|p| p.jitter_max).fold(0.0, f64::max));
    report.notes.push(format!(
        "growth rate is (1/T) log(L_T/L_0); a path counts as shrinking when diam(T) < diam(0)/{}",
        params.shrink_factor
    ));
    report.notes.push(
        "success_count and frequency refer to shrinking paths; mean and se to all growth rates".into(),
    );
    Ok(ExperimentOutput { report, records })
}
