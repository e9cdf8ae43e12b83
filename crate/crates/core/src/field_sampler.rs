//! Exact Gaussian increments of the generating field on finite point sets,
//! and the deterministic drift fields added to them.
//!
//! The increments `ΔM(x_1), …, ΔM(x_N)` over a step `dt` are jointly
//! Gaussian with covariance `C·dt`, `C[i][j] = b(x_i − x_j)`. The sampler
//! factorizes that law in a reference-plus-differences basis: with `r` the
//! reference point and `G = I − b`,
//!
//! ```text
//! Var ΔM(x_r)            = I
//! Cov(ΔM(x_r), D_i)      = −G(x_i − x_r)
//! Cov(D_i, D_j)          = G(x_i − x_r) + G(x_j − x_r) − G(x_i − x_j)
//! ```
//!
//! where `D_i = ΔM(x_i) − ΔM(x_r)`. This is the same Gaussian law as `C`,
//! but tightly clustered points no longer lose their relative motion to
//! rounding in `1 − b`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use nalgebra::{Cholesky, DMatrix};

use crate::covariance::{IbfModel, MatrixD};
use crate::error::{Error, Result};
use crate::flow_engine::PointCloud;
use crate::rkhs::{self, SphereRule};

/// First relative jitter tried when the factorization fails, per point.
pub const JITTER_START: f64 = 1e-12;
/// Largest relative jitter before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Cholesky factor of the increment law on a fixed point set.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    d: usize,
    n: usize,
    /// `order[k]` is the original index of the `k`-th point in canonical order.
    order: Vec<usize>,
    /// Lower-triangular factor of the reference/difference covariance,
    /// `None` when all differences are identically zero.
    factor: Option<DMatrix<f64>>,
    jitter_used: f64,
}

/// One sampled increment split into the common (reference) part and the
/// per-point differences: `ΔM(x_i) = common + relative_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIncrement {
    /// Original index of the reference point; its relative part is zero.
    pub reference: usize,
    pub common: Vec<f64>,
    pub relative: Vec<f64>,
}

impl SplitIncrement {
    pub fn combined(&self) -> Vec<f64> {
        let d = self.common.len();
        self.relative
            .chunks(d)
            .flat_map(|r| r.iter().zip(&self.common).map(|(a, b)| a + b))
            .collect()
    }
}

impl IncrementSampler {
    /// Assemble and factor the covariance of the increments at `points`.
    pub fn build(model: &IbfModel, points: &PointCloud) -> Result<Self> {
        let d = model.dim();
        if points.dim() != d {
            return Err(Error::param(format!(
                "point cloud dimension {} does not match model dimension {d}",
                points.dim()
            )));
        }
        let n = points.len();
        if n == 0 {
            return Err(Error::param("cannot sample increments on an empty point set"));
        }
        if !points.is_finite() {
            return Err(Error::param("point cloud contains non-finite coordinates"));
        }
        let order = canonical_order(points);
        if n == 1 {
            return Ok(Self {
                d,
                n,
                order,
                factor: None,
                jitter_used: 0.0,
            });
        }

        let m = (n - 1) * d;
        let dim = d + m;
        let reference = points.point(order[0]);
        // deficits relative to the reference point
        let mut g_ref = vec![0.0; (n - 1) * d * d];
        let mut diff = vec![0.0; d];
        for k in 1..n {
            let p = points.point(order[k]);
            for i in 0..d {
                diff[i] = p[i] - reference[i];
            }
            model.tensor_into(&diff, true, &mut g_ref[(k - 1) * d * d..k * d * d]);
        }
        let mut kmat = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..d {
            kmat[(i, i)] = 1.0;
        }
        let mut g = vec![0.0; d * d];
        for a in 1..n {
            let ga = &g_ref[(a - 1) * d * d..a * d * d];
            // cross block with the reference
            for i in 0..d {
                for j in 0..d {
                    let v = -ga[i * d + j];
                    kmat[(d + (a - 1) * d + i, j)] = v;
                    kmat[(j, d + (a - 1) * d + i)] = v;
                }
            }
            for bidx in 1..=a {
                let gb = &g_ref[(bidx - 1) * d * d..bidx * d * d];
                if a == bidx {
                    g.fill(0.0);
                } else {
                    let pa = points.point(order[a]);
                    let pb = points.point(order[bidx]);
                    for i in 0..d {
                        diff[i] = pa[i] - pb[i];
                    }
                    model.tensor_into(&diff, true, &mut g);
                }
                for i in 0..d {
                    for j in 0..d {
                        let v = ga[i * d + j] + gb[i * d + j] - g[i * d + j];
                        let (r, c) = (d + (a - 1) * d + i, d + (bidx - 1) * d + j);
                        kmat[(r, c)] = v;
                        kmat[(c, r)] = v;
                    }
                }
            }
        }

        let scale = (d..dim).map(|i| kmat[(i, i)]).sum::<f64>() / m as f64;
        if scale == 0.0 {
            // every difference block vanishes: all points move together
            return Ok(Self {
                d,
                n,
                order,
                factor: None,
                jitter_used: 0.0,
            });
        }

        if let Some(ch) = Cholesky::new(kmat.clone()) {
            return Ok(Self {
                d,
                n,
                order,
                factor: Some(ch.l()),
                jitter_used: 0.0,
            });
        }
        let mut rel = JITTER_START * n as f64;
        loop {
            let rel_now = rel.min(JITTER_MAX);
            let jitter = rel_now * scale;
            let mut jittered = kmat.clone();
            for i in d..dim {
                jittered[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::new(jittered) {
                return Ok(Self {
                    d,
                    n,
                    order,
                    factor: Some(ch.l()),
                    jitter_used: jitter,
                });
            }
            if rel_now >= JITTER_MAX {
                let (pair, separation) = closest_pair(points);
                return Err(Error::DegenerateConfiguration {
                    pair,
                    separation,
                    jitter,
                });
            }
            rel *= 10.0;
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Absolute diagonal jitter added to the difference block (0 if none).
    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Original index of the reference point.
    pub fn reference(&self) -> usize {
        self.order[0]
    }

    /// Canonical ordering of the points (original indices).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Lower-triangular factor in the reference/difference basis, if any.
    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref()
    }

    /// Draw one increment over a step of length `dt`, split into common and
    /// relative parts.
    pub fn sample_split<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> SplitIncrement {
        debug_assert!(dt > 0.0);
        let d = self.d;
        let n = self.n;
        let sq = dt.sqrt();
        let dim = n * d;
        let z: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut relative = vec![0.0; n * d];
        let common: Vec<f64> = match &self.factor {
            None => z[..d].iter().map(|v| sq * v).collect(),
            Some(l) => {
                // y = L z, row by row over the lower triangle
                let mut y = vec![0.0; dim];
                for (r, yr) in y.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for c in 0..=r {
                        acc += l[(r, c)] * z[c];
                    }
                    *yr = sq * acc;
                }
                for k in 1..n {
                    let dst = self.order[k] * d;
                    relative[dst..dst + d].copy_from_slice(&y[k * d..(k + 1) * d]);
                }
                y[..d].to_vec()
            }
        };
        SplitIncrement {
            reference: self.order[0],
            common,
            relative,
        }
    }

    /// Draw `ΔM(x_i)` for every point, flat `N·d` layout in original order.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Vec<f64> {
        self.sample_split(dt, rng).combined()
    }
}

/// Block covariance `C[i][j] = b(x_i − x_j)` in original point order.
pub fn covariance_matrix(model: &IbfModel, points: &PointCloud) -> MatrixD {
    let d = model.dim();
    let n = points.len();
    let mut c = MatrixD::zeros(n * d, n * d);
    let mut diff = vec![0.0; d];
    let mut b = vec![0.0; d * d];
    for i in 0..n {
        for j in 0..n {
            let (pi, pj) = (points.point(i), points.point(j));
            for k in 0..d {
                diff[k] = pi[k] - pj[k];
            }
            model.tensor_into(&diff, false, &mut b);
            for r in 0..d {
                for s in 0..d {
                    c[(i * d + r, j * d + s)] = b[r * d + s];
                }
            }
        }
    }
    c
}

/// Lexicographic order of the points, ties broken by index.
fn canonical_order(points: &PointCloud) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points.point(a), points.point(b));
        pa.iter()
            .zip(pb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn closest_pair(points: &PointCloud) -> ((usize, usize), f64) {
    let mut best = ((0, 0), f64::INFINITY);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dist = points.distance(i, j);
            if dist < best.1 {
                best = ((i, j), dist);
            }
        }
    }
    best
}

/// Deterministic drift `v(x)` of the flow `dφ = M(dt, φ) + v(φ) dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(remote = "Self", tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftField {
    #[default]
    None,
    /// `v(x) = A x`, rows of `A` given as nested arrays.
    Linear { matrix: Vec<Vec<f64>> },
    /// `v(x) = scale · V(x)` with `V` the mean inward field at radius `rho`.
    RadialRkhs {
        rho: f64,
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    /// Multilinear interpolation of values on a regular grid, constant
    /// outside. `values` is in row-major order, last axis fastest.
    CustomTable {
        lower: Vec<f64>,
        spacing: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<Vec<f64>>,
    },
}

impl Serialize for DriftField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DriftField::serialize(self, s)
    }
}

impl<'de> Deserialize<'de> for DriftField {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(de)?;
        if let Some(obj) = v.as_object() {
            if obj.get("kind").and_then(|k| k.as_str()) == Some("none") && obj.len() > 1 {
                return Err(D::Error::custom("drift kind `none` takes no parameters"));
            }
        }
        DriftField::deserialize(v).map_err(D::Error::custom)
    }
}

/// Model and quadrature rule required by [`DriftField::RadialRkhs`].
#[derive(Debug, Clone, Copy)]
pub struct DriftContext<'a> {
    pub model: &'a IbfModel,
    pub rule: &'a SphereRule,
}

impl DriftField {
    /// Structural checks against dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            DriftField::None => Ok(()),
            DriftField::Linear { matrix } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(Error::param(format!("linear drift matrix must be {d}x{d}")));
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::param("linear drift matrix has non-finite entries"));
                }
                Ok(())
            }
            DriftField::RadialRkhs {
                rho,
                scale,
                resolution,
            } => {
                if !(rho.is_finite() && *rho > 0.0) {
                    return Err(Error::param(format!("radial_rkhs rho must be positive, got {rho}")));
                }
                if !scale.is_finite() {
                    return Err(Error::param("radial_rkhs scale must be finite"));
                }
                if resolution == &Some(0) {
                    return Err(Error::param("radial_rkhs resolution must be positive"));
                }
                Ok(())
            }
            DriftField::CustomTable {
                lower,
                spacing,
                shape,
                values,
            } => {
                if lower.len() != d || spacing.len() != d || shape.len() != d {
                    return Err(Error::param(format!(
                        "custom_table lower/spacing/shape must each have {d} entries"
                    )));
                }
                if spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(Error::param("custom_table spacing must be positive"));
                }
                if shape.iter().any(|&s| s < 2) {
                    return Err(Error::param("custom_table needs at least 2 nodes per axis"));
                }
                let total: usize = shape.iter().product();
                if values.len() != total || values.iter().any(|v| v.len() != d) {
                    return Err(Error::param(format!(
                        "custom_table needs {total} values of length {d}"
                    )));
                }
                if values.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::param("custom_table values must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, DriftField::None)
    }

    /// Sphere rule resolution used for `radial_rkhs` quadrature.
    pub fn default_resolution(d: usize) -> usize {
        match d {
            2 => 64,
            3 => 16,
            _ => 2048,
        }
    }

    /// Evaluate `v(x)`.
    pub fn eval(&self, x: &[f64], ctx: Option<DriftContext<'_>>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, ctx, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], ctx: Option<DriftContext<'_>>, out: &mut [f64]) -> Result<()> {
        let d = x.len();
        match self {
            DriftField::None => out.fill(0.0),
            DriftField::Linear { matrix } => {
                for (o, row) in out.iter_mut().zip(matrix) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            DriftField::RadialRkhs { rho, scale, .. } => {
                let ctx = ctx.ok_or_else(|| {
                    Error::model("radial_rkhs drift needs the model and a sphere rule")
                })?;
                rkhs::mean_inward_field_into(ctx.model, *rho, ctx.rule, x, out);
                for o in out.iter_mut() {
                    *o *= scale;
                }
            }
            DriftField::CustomTable {
                lower,
                spacing,
                shape,
                values,
            } => {
                if let Some(&bad) = x.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Evaluation { abscissa: bad });
                }
                out.fill(0.0);
                // cell index and fractional offset per axis, clamped
                let mut base = vec![0usize; d];
                let mut frac = vec![0.0; d];
                for a in 0..d {
                    let u = ((x[a] - lower[a]) / spacing[a]).clamp(0.0, (shape[a] - 1) as f64);
                    let i = (u.floor() as usize).min(shape[a] - 2);
                    base[a] = i;
                    frac[a] = u - i as f64;
                }
                for corner in 0..(1usize << d) {
                    let mut w = 1.0;
                    let mut flat = 0usize;
                    for a in 0..d {
                        let bit = (corner >> a) & 1;
                        w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                        flat = flat * shape[a] + base[a] + bit;
                    }
                    if w != 0.0 {
                        for (o, v) in out.iter_mut().zip(&values[flat]) {
                            *o += w * v;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// A global Lipschitz constant for the field.
    pub fn lipschitz(&self, ctx: Option<DriftContext<'_>>) -> Result<f64> {
        match self {
            DriftField::None => Ok(0.0),
            DriftField::Linear { matrix } => {
                Ok(matrix.iter().flatten().map(|v| v * v).sum::<f64>().sqrt())
            }
            DriftField::RadialRkhs { rho, scale, .. } => {
                let ctx = ctx.ok_or_else(|| {
                    Error::model("radial_rkhs drift needs the model and a sphere rule")
                })?;
                // |DV u| ≤ ‖V‖_H · sqrt(max(βL, βN)) per component
                let (lhs, _) = rkhs::squeeze_functional(ctx.model, *rho, ctx.rule)?;
                let c = ctx.model.flow_constants()?;
                let d = ctx.model.dim() as f64;
                Ok(scale.abs() * (d * lhs.max(0.0) * c.beta_l.max(c.beta_n)).sqrt())
            }
            DriftField::CustomTable {
                spacing,
                shape,
                values,
                ..
            } => {
                let d = shape.len();
                let mut worst = 0.0f64;
                let mut stride = vec![1usize; d];
                for a in (0..d.saturating_sub(1)).rev() {
                    stride[a] = stride[a + 1] * shape[a + 1];
                }
                for (flat, v) in values.iter().enumerate() {
                    for a in 0..d {
                        let idx = (flat / stride[a]) % shape[a];
                        if idx + 1 < shape[a] {
                            let w = &values[flat + stride[a]];
                            let diff: f64 =
                                v.iter().zip(w).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                            worst = worst.max(diff / spacing[a]);
                        }
                    }
                }
                Ok(worst * (d as f64).sqrt())
            }
        }
    }

    /// Bind to a model, building the sphere rule the field needs.
    pub fn bind<'a>(&'a self, model: &'a IbfModel) -> Result<BoundDrift<'a>> {
        self.validate(model.dim())?;
        let rule = match self {
            DriftField::RadialRkhs { resolution, .. } => Some(rkhs::sphere_rule(
                model.dim(),
                resolution.unwrap_or_else(|| Self::default_resolution(model.dim())),
                Some(0),
            )?),
            _ => None,
        };
        Ok(BoundDrift {
            field: self,
            model,
            rule,
        })
    }
}

/// A drift field paired with everything needed to evaluate it.
#[derive(Debug, Clone)]
pub struct BoundDrift<'a> {
    field: &'a DriftField,
    model: &'a IbfModel,
    rule: Option<SphereRule>,
}

impl BoundDrift<'_> {
    pub fn field(&self) -> &DriftField {
        self.field
    }

    fn ctx(&self) -> Option<DriftContext<'_>> {
        self.rule.as_ref().map(|rule| DriftContext {
            model: self.model,
            rule,
        })
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.field.eval_into(x, self.ctx(), out)
    }

    pub fn lipschitz(&self) -> Result<f64> {
        self.field.lipschitz(self.ctx())
    }
}
