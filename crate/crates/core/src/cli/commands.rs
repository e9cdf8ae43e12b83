use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use super::config::{Command, Params, RunConfig};
use crate::covariance::{IbfModel, Kind};
use crate::error::{Error, Result};
use crate::field_sampler::DriftField;
use crate::flow_engine::{
    length_decay_experiment, lyapunov_estimate, squeeze_experiment, tilted_tracking_error,
    ExperimentOutput, LengthDecayParams, LyapunovParams, PointCloud, SqueezeMode, SqueezeParams,
    Superposition, TrackingParams, VectorField,
};
use crate::rkhs::{check_condition, sphere_rule, squeeze_functional};

/// Files written by a command and its one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub csv: PathBuf,
    pub report: PathBuf,
}

/// Sphere rule resolution for the squeeze-functional quadrature.
pub fn identity_resolution(d: usize) -> usize {
    match d {
        2 => 512,
        3 => 48,
        _ => 4096,
    }
}

/// Execute `cfg`, writing its CSV and report into `out_dir`.
pub fn run_command(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let model = cfg.model.build()?;
    let (csv, results, summary) = match (&cfg.command, &cfg.params) {
        (Command::Covariance, Params::Covariance(p)) => covariance(&model, p.s_min, p.s_max, p.n_points)?,
        (Command::CheckCondition, Params::CheckCondition(p)) => condition(&model, p.rho, p.tol)?,
        (Command::VerifyIdentity, Params::VerifyIdentity(p)) => {
            identity(&model, &p.rhos, p.resolution.unwrap_or(identity_resolution(model.dim())), cfg.seed)?
        }
        (Command::Lyapunov, Params::Lyapunov(p)) => lyapunov(&model, p, cfg.seed)?,
        (Command::Squeeze | Command::Expand, Params::Squeeze(p)) => squeeze(&model, cfg.command, p, cfg.seed)?,
        (Command::TrackControl, Params::TrackControl(p)) => track(&model, p, cfg.seed)?,
        (Command::LengthDecay, Params::LengthDecay(p)) => length_decay(&model, p, cfg.seed)?,
        _ => return Err(Error::config("params", "do not match the command")),
    };

    let mut report = Map::new();
    report.insert("version".into(), json!(crate::VERSION));
    report.insert("command".into(), json!(cfg.command.name()));
    report.insert("config".into(), cfg.to_json());
    report.insert("normalized_model".into(), normalized_model(&model));
    if let Value::Object(fields) = results {
        for (k, v) in fields {
            report.insert(k, v);
        }
    }
    report.insert("wall_clock_seconds".into(), json!(start.elapsed().as_secs_f64()));

    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(cfg.csv_name());
    let report_path = out_dir.join(cfg.report_name());
    fs::write(&csv_path, csv)?;
    let text = serde_json::to_string_pretty(&Value::Object(report))
        .map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&report_path, text + "\n")?;
    Ok(Outcome {
        summary,
        csv: csv_path,
        report: report_path,
    })
}

/// Seventeen significant digits; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn normalized_model(model: &IbfModel) -> Value {
    json!({
        "d": model.dim(),
        "mu": model.mu(),
        "potential": model.potential(),
        "solenoidal": model.solenoidal(),
    })
}

type Emitted = (String, Value, String);

fn covariance(model: &IbfModel, s_min: f64, s_max: f64, n: usize) -> Result<Emitted> {
    let mut csv = String::from("s,B_L,B_N,B_PL,B_PN,B_SL,B_SN\n");
    for i in 0..n {
        let s = s_min + (s_max - s_min) * i as f64 / (n - 1) as f64;
        let parts = model.radial_parts(s);
        write!(csv, "{},{},{}", fmt_f64(s), fmt_f64(parts.b_l), fmt_f64(parts.b_n)).ok();
        for kind in Kind::ALL {
            let cell = model.b_scalar(kind, s).map(fmt_f64).unwrap_or_default();
            write!(csv, ",{cell}").ok();
        }
        csv.push('\n');
    }
    let constants = model.flow_constants().ok();
    let summary = match &constants {
        Some(c) => format!(
            "covariance: {n} rows; beta_L={:.6} beta_N={:.6} lambda={:.6}",
            c.beta_l, c.beta_n, c.lambda
        ),
        None => format!("covariance: {n} rows; trivial flow"),
    };
    Ok((csv, json!({ "rows": n, "flow_constants": constants }), summary))
}

fn condition(model: &IbfModel, rho: f64, tol: f64) -> Result<Emitted> {
    let report = check_condition(model, rho, tol)?;
    let mut csv = String::from("zero_index,zero,location\n");
    for (i, z) in report.zero_locations_checked.iter().enumerate() {
        writeln!(csv, "{i},{},{}", fmt_f64(*z), fmt_f64(z / rho)).ok();
    }
    let summary = format!(
        "check-condition: satisfied={} witness_mass={:.6e} zeros_checked={}",
        report.satisfied,
        report.witness_mass,
        report.zero_locations_checked.len()
    );
    Ok((csv, json!({ "condition": report }), summary))
}

fn identity(model: &IbfModel, rhos: &[f64], resolution: usize, seed: u64) -> Result<Emitted> {
    let rule = sphere_rule(model.dim(), resolution, Some(seed))?;
    let mut csv = String::from("rho,lhs,rhs,rel_gap\n");
    let mut rows = Vec::new();
    let mut max_gap: f64 = 0.0;
    for &rho in rhos {
        let (lhs, rhs) = squeeze_functional(model, rho, &rule)?;
        let gap = (lhs - rhs).abs() / rhs.abs().max(1e-6);
        max_gap = max_gap.max(gap);
        writeln!(csv, "{},{},{},{}", fmt_f64(rho), fmt_f64(lhs), fmt_f64(rhs), fmt_f64(gap)).ok();
        rows.push(json!({ "rho": rho, "lhs": lhs, "rhs": rhs, "rel_gap": gap }));
    }
    let summary = format!(
        "verify-identity: {} radii at resolution {resolution}; max relative gap {max_gap:.3e}",
        rhos.len()
    );
    Ok((
        csv,
        json!({ "resolution": resolution, "rows": rows, "max_rel_gap": max_gap }),
        summary,
    ))
}

fn lyapunov(model: &IbfModel, p: &super::config::LyapunovConfig, seed: u64) -> Result<Emitted> {
    let drift = model.drift().bind(model)?;
    let params = LyapunovParams {
        t: p.t,
        dt: p.dt,
        n_pairs: p.n_pairs,
        renorm_eps: p.renorm_eps,
    };
    let r = lyapunov_estimate(model, params, &drift, seed)?;
    let mut csv = String::from("pair,estimate\n");
    for (k, e) in r.estimates.iter().enumerate() {
        writeln!(csv, "{k},{}", fmt_f64(*e)).ok();
    }
    let constants = model.flow_constants().ok();
    let analytic = constants.map(|c| c.lambda).unwrap_or(0.0);
    let summary = format!(
        "lyapunov: estimate {:.5} ± {:.5} (SE) over {} pairs; analytic lambda {analytic:.5}",
        r.estimate, r.standard_error, p.n_pairs
    );
    let pairs: Vec<Value> = r
        .estimates
        .iter()
        .zip(&r.seeds)
        .enumerate()
        .map(|(k, (e, s))| json!({ "pair": k, "seed": s, "estimate": e }))
        .collect();
    Ok((
        csv,
        json!({
            "estimate": r.estimate,
            "standard_error": r.standard_error,
            "analytic_lambda": analytic,
            "flow_constants": constants,
            "jitter_max": r.jitter_max,
            "pairs": pairs,
        }),
        summary,
    ))
}

fn experiment_fields(out: &ExperimentOutput) -> Value {
    let mut v = serde_json::to_value(&out.report).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        for key in ["version", "command", "config", "wall_clock_seconds"] {
            m.remove(key);
        }
    }
    v
}

fn squeeze(
    model: &IbfModel,
    command: Command,
    p: &super::config::SqueezeConfig,
    seed: u64,
) -> Result<Emitted> {
    let mode = if command == Command::Expand {
        SqueezeMode::Expand
    } else {
        SqueezeMode::Squeeze
    };
    let bound = model.drift().bind(model)?;
    let sign = if mode == SqueezeMode::Expand { -1.0 } else { 1.0 };
    let drift = Superposition::new(vec![(sign, &bound as &dyn VectorField)]);
    let params = SqueezeParams {
        radius: p.radius,
        delta: p.delta,
        t1: p.t1,
        t2: p.t2,
        n_boundary: p.n_boundary,
        dt: p.dt,
        n_paths: p.n_paths,
        stride: p.stride,
        mode,
    };
    let out = squeeze_experiment(model, params, &drift, seed)?;
    let mut csv = String::from("path,t,diam,contained\n");
    for r in &out.records {
        let flags = r.contained.as_deref().unwrap_or_default();
        for ((t, dm), f) in r.times.iter().zip(&r.diameters).zip(flags) {
            writeln!(csv, "{},{},{},{}", r.path, fmt_f64(*t), fmt_f64(*dm), f).ok();
        }
    }
    let a = &out.report.aggregate;
    let k = a.success_count.unwrap_or(0);
    let ci = a.wilson_95.unwrap_or([0.0, 1.0]);
    let summary = format!(
        "{command}: success {k}/{} (frequency {:.3}, 95% CI [{:.3}, {:.3}])",
        a.n_paths,
        a.frequency.unwrap_or(0.0),
        ci[0],
        ci[1]
    );
    let mut fields = experiment_fields(&out);
    if model.drift().is_none() && mode == SqueezeMode::Squeeze {
        if let Value::Object(m) = &mut fields {
            if let Some(Value::Array(notes)) = m.get_mut("notes") {
                notes.push(json!(
                    "untilted run: positivity of the event probability is not checkable at this scale; \
                     the tilted (radial_rkhs drift) run is the quantitative surrogate"
                ));
            }
        }
    }
    Ok((csv, fields, summary))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn track(model: &IbfModel, p: &super::config::TrackControlConfig, seed: u64) -> Result<Emitted> {
    let v = DriftField::RadialRkhs {
        rho: p.rho,
        scale: 1.0,
        resolution: p.resolution,
    };
    let field = v.bind(model)?;
    let own = model.drift().bind(model)?;
    let x0 = PointCloud::from_points(&p.x0)?;
    let mut csv = String::from("c,path,sup_deviation\n");
    let mut levels = Vec::new();
    let mut means = Vec::new();
    for &c in &p.c_values {
        let params = TrackingParams {
            c,
            t: p.t,
            dt: p.dt,
            n_paths: p.n_paths,
            noise: p.noise,
        };
        let r = tilted_tracking_error(model, &field, &own, &x0, params, seed)?;
        for (k, dev) in r.deviations.iter().enumerate() {
            writeln!(csv, "{},{k},{}", fmt_f64(c), fmt_f64(*dev)).ok();
        }
        means.push(r.mean);
        levels.push(json!({
            "c": c,
            "mean": r.mean,
            "se": r.standard_error,
            "jitter_max": r.jitter_max,
        }));
    }
    let slope = if p.c_values.len() >= 2 {
        Some(log_log_slope(&p.c_values, &means))
    } else {
        None
    };
    let summary = match slope {
        Some(s) => format!("track-control: {} tilt levels; log-log slope {s:.4}", p.c_values.len()),
        None => format!("track-control: mean sup deviation {:.4e}", means[0]),
    };
    Ok((csv, json!({ "levels": levels, "slope": slope }), summary))
}

fn length_decay(model: &IbfModel, p: &super::config::LengthDecayConfig, seed: u64) -> Result<Emitted> {
    let drift = model.drift().bind(model)?;
    let curve = PointCloud::from_points(&p.curve)?;
    let params = LengthDecayParams {
        t: p.t,
        dt: p.dt,
        n_paths: p.n_paths,
        stride: p.stride,
        closed: p.closed,
        shrink_factor: p.shrink_factor,
    };
    let out = length_decay_experiment(model, &curve, params, &drift, seed)?;
    let l0 = out.report.aggregate.extra["initial_length"];
    let mut csv = String::from("path,t,diam,length,growth_rate\n");
    for r in &out.records {
        let lengths = r.lengths.as_deref().unwrap_or_default();
        for ((t, dm), l) in r.times.iter().zip(&r.diameters).zip(lengths) {
            let rate = if *t > 0.0 { fmt_f64((l / l0).ln() / t) } else { String::new() };
            writeln!(csv, "{},{},{},{},{rate}", r.path, fmt_f64(*t), fmt_f64(*dm), fmt_f64(*l)).ok();
        }
    }
    let mut fields = experiment_fields(&out);
    if let (Ok(c), Value::Object(m)) = (model.flow_constants(), &mut fields) {
        m.insert("flow_constants".into(), json!(c));
        m.insert("upper_growth_bound".into(), json!(c.lambda + c.beta_l / 2.0));
    }
    let a = &out.report.aggregate;
    let summary = format!(
        "length-decay: {}/{} paths shrinking; terminal growth rate mean {:.4} (max {:.4})",
        a.success_count.unwrap_or(0),
        a.n_paths,
        a.mean,
        a.extra["max_growth"]
    );
    Ok((csv, fields, summary))
}
