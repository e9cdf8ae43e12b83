//! Run configuration documents.
//!
//! ```json
//! {
//!   "command": "squeeze",
//!   "seed": 7,
//!   "model": {
//!     "d": 2, "mu0": 0, "mu1": 1, "mu2": 0,
//!     "potential": {"atoms": [[1.0, 1.0]]},
//!     "drift": {"kind": "radial_rkhs", "rho": 1.0, "scale": 64}
//!   },
//!   "params": {"radius": 1.0, "delta": 0.1, "t1": 0.5, "t2": 1.0,
//!              "n_boundary": 64, "dt": 0.001, "n_paths": 200},
//!   "output": {"csv": "squeeze.csv", "report": "squeeze.json"}
//! }
//! ```
//!
//! Physical quantities have no defaults; numerical knobs (resolutions,
//! snapshot stride, tolerances) do.

use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::covariance::IbfModel;
use crate::error::{Error, Result};
use crate::field_sampler::DriftField;
use crate::flow_engine::DEFAULT_STRIDE;
use crate::rkhs::DEFAULT_ZERO_TOL;
use crate::spectral::SpectralMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Covariance,
    CheckCondition,
    VerifyIdentity,
    Lyapunov,
    Squeeze,
    Expand,
    TrackControl,
    LengthDecay,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Covariance,
        Command::CheckCondition,
        Command::VerifyIdentity,
        Command::Lyapunov,
        Command::Squeeze,
        Command::Expand,
        Command::TrackControl,
        Command::LengthDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Covariance => "covariance",
            Command::CheckCondition => "check-condition",
            Command::VerifyIdentity => "verify-identity",
            Command::Lyapunov => "lyapunov",
            Command::Squeeze => "squeeze",
            Command::Expand => "expand",
            Command::TrackControl => "track-control",
            Command::LengthDecay => "length-decay",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config("command", format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub d: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<SpectralMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solenoidal: Option<SpectralMeasure>,
    /// Required to accept the `μ0 = 1` translation flow.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_trivial: bool,
    #[serde(default, skip_serializing_if = "DriftField::is_none")]
    pub drift: DriftField,
}

impl ModelSpec {
    /// Build the model, normalizing the measures.
    pub fn build(&self) -> Result<IbfModel> {
        let wrap = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config("model", other.to_string()),
        };
        let d = self.d;
        let m_p = self
            .potential
            .as_ref()
            .map(|m| m.normalize_potential(d))
            .transpose()
            .map_err(|e| Error::config("model.potential", e.to_string()))?;
        let m_s = self
            .solenoidal
            .as_ref()
            .map(|m| m.normalize_solenoidal(d))
            .transpose()
            .map_err(|e| Error::config("model.solenoidal", e.to_string()))?;
        let model = IbfModel::with_trivial_flag(
            d,
            [self.mu0, self.mu1, self.mu2],
            m_p,
            m_s,
            self.allow_trivial,
        )
        .map_err(wrap)?;
        self.drift
            .validate(d)
            .map_err(|e| Error::config("model.drift", e.to_string()))?;
        Ok(model.with_drift(self.drift.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceParams {
    #[serde(default)]
    pub s_min: f64,
    pub s_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConditionParams {
    pub rho: f64,
    #[serde(default = "default_zero_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyIdentityParams {
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub t: f64,
    pub dt: f64,
    pub n_pairs: usize,
    #[serde(default = "default_renorm_eps")]
    pub renorm_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezeConfig {
    pub radius: f64,
    pub delta: f64,
    pub t1: f64,
    pub t2: f64,
    pub n_boundary: usize,
    pub dt: f64,
    pub n_paths: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackControlConfig {
    pub rho: f64,
    pub c_values: Vec<f64>,
    pub x0: Vec<Vec<f64>>,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default = "default_true")]
    pub noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthDecayConfig {
    pub curve: Vec<Vec<f64>>,
    #[serde(default)]
    pub closed: bool,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_shrink")]
    pub shrink_factor: f64,
}

fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}

fn default_rhos() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 4.0]
}

fn default_renorm_eps() -> f64 {
    1e-4
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

fn default_shrink() -> f64 {
    10.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Covariance(CovarianceParams),
    CheckCondition(CheckConditionParams),
    VerifyIdentity(VerifyIdentityParams),
    Lyapunov(LyapunovConfig),
    /// Shared by `squeeze` and `expand`.
    Squeeze(SqueezeConfig),
    TrackControl(TrackControlConfig),
    LengthDecay(LengthDecayConfig),
}

/// A fully validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub model: ModelSpec,
    pub params: Params,
    pub output: OutputSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: String,
    seed: u64,
    model: Value,
    params: Value,
    #[serde(default)]
    output: Value,
}

impl RunConfig {
    pub fn csv_name(&self) -> String {
        self.output
            .csv
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.command))
    }

    pub fn report_name(&self) -> String {
        self.output
            .report
            .clone()
            .unwrap_or_else(|| format!("{}.json", self.command))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::config("document", e.to_string()))?;
    if let Some(obj) = value.as_object() {
        for key in ["command", "seed", "model", "params"] {
            if !obj.contains_key(key) {
                return Err(Error::config(key, "missing required field"));
            }
        }
    } else {
        return Err(Error::config("document", "top level must be an object"));
    }
    let raw: RawConfig =
        serde_json::from_value(value).map_err(|e| Error::config("document", e.to_string()))?;
    let command: Command = raw.command.parse()?;
    let model: ModelSpec =
        serde_json::from_value(raw.model).map_err(|e| Error::config("model", e.to_string()))?;
    let output: OutputSpec = if raw.output.is_null() {
        OutputSpec::default()
    } else {
        serde_json::from_value(raw.output).map_err(|e| Error::config("output", e.to_string()))?
    };
    let params = match command {
        Command::Covariance => Params::Covariance(params_as(raw.params)?),
        Command::CheckCondition => Params::CheckCondition(params_as(raw.params)?),
        Command::VerifyIdentity => Params::VerifyIdentity(params_as(raw.params)?),
        Command::Lyapunov => Params::Lyapunov(params_as(raw.params)?),
        Command::Squeeze | Command::Expand => Params::Squeeze(params_as(raw.params)?),
        Command::TrackControl => Params::TrackControl(params_as(raw.params)?),
        Command::LengthDecay => Params::LengthDecay(params_as(raw.params)?),
    };
    let cfg = RunConfig {
        command,
        seed: raw.seed,
        model,
        params,
        output,
    };
    let model = cfg.model.build()?;
    validate_params(&cfg, &model)?;
    Ok(cfg)
}

fn params_as<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::config("params", e.to_string()))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be at least {min}, got {v}")))
    }
}

fn step_fits(dt: f64, span: f64) -> Result<()> {
    positive("params.dt", dt)?;
    if dt > span {
        return Err(Error::config("params.dt", format!("must not exceed the time span {span}")));
    }
    Ok(())
}

fn points_of_dim(field: &str, pts: &[Vec<f64>], d: usize, min: usize) -> Result<()> {
    if pts.len() < min {
        return Err(Error::config(field, format!("needs at least {min} points")));
    }
    if pts.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::config(field, format!("every point must have {d} finite coordinates")));
    }
    Ok(())
}

fn validate_params(cfg: &RunConfig, model: &IbfModel) -> Result<()> {
    let d = model.dim();
    match &cfg.params {
        Params::Covariance(p) => {
            if !(p.s_min.is_finite() && p.s_min >= 0.0) {
                return Err(Error::config("params.s_min", "must be >= 0"));
            }
            positive("params.s_max", p.s_max)?;
            if p.s_max <= p.s_min {
                return Err(Error::config("params.s_max", "must exceed s_min"));
            }
            at_least("params.n_points", p.n_points, 2)?;
        }
        Params::CheckCondition(p) => {
            positive("params.rho", p.rho)?;
            positive("params.tol", p.tol)?;
        }
        Params::VerifyIdentity(p) => {
            if p.rhos.is_empty() {
                return Err(Error::config("params.rhos", "needs at least one radius"));
            }
            for r in &p.rhos {
                positive("params.rhos", *r)?;
            }
            if let Some(r) = p.resolution {
                at_least("params.resolution", r, 1)?;
            }
        }
        Params::Lyapunov(p) => {
            positive("params.t", p.t)?;
            step_fits(p.dt, p.t)?;
            at_least("params.n_pairs", p.n_pairs, 1)?;
            if !(p.renorm_eps > 1e-8 && p.renorm_eps < 1e-2) {
                return Err(Error::config("params.renorm_eps", "must lie in (1e-8, 1e-2)"));
            }
        }
        Params::Squeeze(p) => {
            positive("params.radius", p.radius)?;
            positive("params.delta", p.delta)?;
            if p.delta >= p.radius {
                return Err(Error::config("params.delta", "must be smaller than radius"));
            }
            positive("params.t1", p.t1)?;
            if !(p.t2 > p.t1 && p.t2.is_finite()) {
                return Err(Error::config("params.t2", "must exceed t1"));
            }
            step_fits(p.dt, p.t2)?;
            at_least("params.n_boundary", p.n_boundary, 8)?;
            at_least("params.n_paths", p.n_paths, 1)?;
            at_least("params.stride", p.stride, 1)?;
        }
        Params::TrackControl(p) => {
            positive("params.rho", p.rho)?;
            if p.c_values.is_empty() || p.c_values.iter().any(|c| !(c.is_finite() && *c >= 1.0)) {
                return Err(Error::config("params.c_values", "needs values c >= 1"));
            }
            points_of_dim("params.x0", &p.x0, d, 1)?;
            positive("params.t", p.t)?;
            step_fits(p.dt, p.t)?;
            at_least("params.n_paths", p.n_paths, 1)?;
            if let Some(r) = p.resolution {
                at_least("params.resolution", r, 1)?;
            }
        }
        Params::LengthDecay(p) => {
            points_of_dim("params.curve", &p.curve, d, 2)?;
            positive("params.t", p.t)?;
            step_fits(p.dt, p.t)?;
            at_least("params.n_paths", p.n_paths, 1)?;
            at_least("params.stride", p.stride, 1)?;
            if !(p.shrink_factor > 1.0 && p.shrink_factor.is_finite()) {
                return Err(Error::config("params.shrink_factor", "must exceed 1"));
            }
        }
    }
    if let DriftField::RadialRkhs { .. } = model.drift() {
        if model.is_trivial() {
            return Err(Error::config(
                "model.drift",
                "radial_rkhs needs a non-trivial covariance",
            ));
        }
    }
    Ok(())
}
