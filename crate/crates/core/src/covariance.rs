//! Isotropic covariance tensors built from potential and solenoidal spectral
//! measures.
//!
//! With `ν = d/2`, `Λ_μ(z) = J_μ(z)/z^μ` and `c_d = 2^{(d−2)/2} Γ(d/2)`:
//!
//! ```text
//! B_PL(s) = c_d ∫ [Λ_ν(sr) − (sr)² Λ_{ν+1}(sr)] dM_P(r)
//! B_PN(s) = c_d ∫ Λ_ν(sr) dM_P(r)
//! B_SL(s) = c_d (d−1) ∫ Λ_ν(sr) dM_S(r)
//! B_SN(s) = c_d ∫ [Λ_{ν−1}(sr) − Λ_ν(sr)] dM_S(r)
//! ```
//!
//! and `b(x) = (B_L − B_N) x̂x̂ᵀ + B_N I` with `B_L = μ0 + μ1 B_PL + μ2 B_SL`,
//! `B_N = μ0 + μ1 B_PN + μ2 B_SN`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bessel::{gamma_half, Order, TripletKernel};
use crate::error::{Error, Result};
use crate::field_sampler::DriftField;
use crate::spectral::{SpectralMeasure, DEFAULT_QUAD_NODES};

/// Dense `d × d` matrix; values of `b(x)`.
pub type MatrixD = DMatrix<f64>;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 16;

/// Tolerance on `μ0 + μ1 + μ2 = 1`.
pub const MU_SUM_TOL: f64 = 1e-12;
/// Tolerance on the normalized masses `d` and `d/(d−1)`.
pub const MASS_TOL: f64 = 1e-10;

/// One of the four scalar covariance functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    PL,
    PN,
    SL,
    SN,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::PL, Kind::PN, Kind::SL, Kind::SN];
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::PL => "PL",
            Kind::PN => "PN",
            Kind::SL => "SL",
            Kind::SN => "SN",
        };
        f.write_str(s)
    }
}

/// `βL`, `βN` and the top Lyapunov exponent `λ = (d−1)βN/2 − βL/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConstants {
    pub beta_l: f64,
    pub beta_n: f64,
    pub lambda: f64,
}

impl FlowConstants {
    /// `(d+1)βL − (d−1)βN`; zero exactly for divergence-free flows.
    pub fn compressibility(&self, d: usize) -> f64 {
        (d as f64 + 1.0) * self.beta_l - (d as f64 - 1.0) * self.beta_n
    }
}

/// Longitudinal and transverse values at one separation, together with
/// their deficits `1 − B` computed without cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadialParts {
    pub b_l: f64,
    pub b_n: f64,
    pub g_l: f64,
    pub g_n: f64,
}

/// Complete isotropic Brownian flow specification.
#[derive(Debug, Clone)]
pub struct IbfModel {
    d: usize,
    mu: [f64; 3],
    m_p: Option<SpectralMeasure>,
    m_s: Option<SpectralMeasure>,
    drift: DriftField,
    trivial: bool,
    kernel: TripletKernel,
    c_d: f64,
    p_nodes: Vec<(f64, f64)>,
    s_nodes: Vec<(f64, f64)>,
}

impl IbfModel {
    /// Build from already-normalized measures. `mu = [μ0, μ1, μ2]`.
    pub fn new(
        d: usize,
        mu: [f64; 3],
        m_p: Option<SpectralMeasure>,
        m_s: Option<SpectralMeasure>,
    ) -> Result<Self> {
        Self::build(d, mu, m_p, m_s, false)
    }

    /// Normalize raw measures to masses `d` and `d/(d−1)` first.
    pub fn normalized(
        d: usize,
        mu: [f64; 3],
        raw_p: Option<&SpectralMeasure>,
        raw_s: Option<&SpectralMeasure>,
    ) -> Result<Self> {
        let m_p = raw_p.map(|m| m.normalize_potential(d)).transpose()?;
        let m_s = raw_s.map(|m| m.normalize_solenoidal(d)).transpose()?;
        Self::new(d, mu, m_p, m_s)
    }

    /// Pure potential model with one atom at `s0`.
    pub fn potential_atom(d: usize, s0: f64) -> Result<Self> {
        let m = SpectralMeasure::atom(s0, 1.0)?;
        Self::normalized(d, [0.0, 1.0, 0.0], Some(&m), None)
    }

    /// Pure solenoidal model with one atom at `s0`.
    pub fn solenoidal_atom(d: usize, s0: f64) -> Result<Self> {
        let m = SpectralMeasure::atom(s0, 1.0)?;
        Self::normalized(d, [0.0, 0.0, 1.0], None, Some(&m))
    }

    /// The `b ≡ I` translation flow (`μ0 = 1`); a test fixture.
    pub fn trivial_translation(d: usize) -> Result<Self> {
        Self::build(d, [1.0, 0.0, 0.0], None, None, true)
    }

    /// Explicitly construct with the trivial-flow flag.
    pub fn with_trivial_flag(
        d: usize,
        mu: [f64; 3],
        m_p: Option<SpectralMeasure>,
        m_s: Option<SpectralMeasure>,
        allow_trivial: bool,
    ) -> Result<Self> {
        Self::build(d, mu, m_p, m_s, allow_trivial)
    }

    fn build(
        d: usize,
        mu: [f64; 3],
        m_p: Option<SpectralMeasure>,
        m_s: Option<SpectralMeasure>,
        allow_trivial: bool,
    ) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&d) {
            return Err(Error::model(format!(
                "dimension must lie in [{MIN_DIM}, {MAX_DIM}], got {d}"
            )));
        }
        if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::model(format!("mu weights must be non-negative, got {mu:?}")));
        }
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > MU_SUM_TOL {
            return Err(Error::model(format!("mu0+mu1+mu2 must equal 1, got {sum}")));
        }
        let df = d as f64;
        check_part("potential", mu[1], m_p.as_ref(), df)?;
        check_part("solenoidal", mu[2], m_s.as_ref(), df / (df - 1.0))?;
        if mu[0] == 1.0 && !allow_trivial {
            return Err(Error::model(
                "mu0 = 1 gives the trivial translation flow; set the trivial flag to allow it",
            ));
        }
        let kernel = TripletKernel::new(Order::half_of(d)?)?;
        let c_d = 2f64.powf((df - 2.0) / 2.0) * gamma_half(d as u32);
        let p_nodes = m_p
            .as_ref()
            .map(|m| m.discretize(DEFAULT_QUAD_NODES))
            .unwrap_or_default();
        let s_nodes = m_s
            .as_ref()
            .map(|m| m.discretize(DEFAULT_QUAD_NODES))
            .unwrap_or_default();
        Ok(Self {
            d,
            mu,
            m_p,
            m_s,
            drift: DriftField::None,
            trivial: mu[0] == 1.0,
            kernel,
            c_d,
            p_nodes,
            s_nodes,
        })
    }

    pub fn with_drift(mut self, drift: DriftField) -> Self {
        self.drift = drift;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> [f64; 3] {
        self.mu
    }

    pub fn mu0(&self) -> f64 {
        self.mu[0]
    }

    pub fn mu1(&self) -> f64 {
        self.mu[1]
    }

    pub fn mu2(&self) -> f64 {
        self.mu[2]
    }

    pub fn potential(&self) -> Option<&SpectralMeasure> {
        self.m_p.as_ref()
    }

    pub fn solenoidal(&self) -> Option<&SpectralMeasure> {
        self.m_s.as_ref()
    }

    pub fn drift(&self) -> &DriftField {
        &self.drift
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// `2^{(d−2)/2} Γ(d/2)`.
    pub fn bessel_prefactor(&self) -> f64 {
        self.c_d
    }

    /// One of `B_PL, B_PN, B_SL, B_SN` at separation `s ≥ 0`.
    pub fn b_scalar(&self, kind: Kind, s: f64) -> Result<f64> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::param(format!("separation must be finite and >= 0, got {s}")));
        }
        let nodes = match kind {
            Kind::PL | Kind::PN => {
                self.m_p
                    .as_ref()
                    .ok_or_else(|| Error::model(format!("B_{kind} needs a potential measure")))?;
                &self.p_nodes
            }
            Kind::SL | Kind::SN => {
                self.m_s
                    .as_ref()
                    .ok_or_else(|| Error::model(format!("B_{kind} needs a solenoidal measure")))?;
                &self.s_nodes
            }
        };
        let df = self.d as f64;
        let mut acc = 0.0;
        for &(r, w) in nodes {
            let z = s * r;
            let t = self.kernel.eval(z);
            acc += w * match kind {
                Kind::PL => t.value[1] - z * z * t.value[2],
                Kind::PN => t.value[1],
                Kind::SL => (df - 1.0) * t.value[1],
                Kind::SN => t.value[0] - t.value[1],
            };
        }
        Ok(self.c_d * acc)
    }

    /// `B_L, B_N` and deficits `1 − B_L, 1 − B_N` at separation `s`.
    pub fn radial_parts(&self, s: f64) -> RadialParts {
        let df = self.d as f64;
        let mut p = [0.0; 4];
        if self.mu[1] > 0.0 {
            for &(r, w) in &self.p_nodes {
                let z = s * r;
                let t = self.kernel.eval(z);
                let z2 = z * z * t.value[2];
                p[0] += w * (t.value[1] - z2);
                p[1] += w * t.value[1];
                p[2] += w * (t.deficit[1] + z2);
                p[3] += w * t.deficit[1];
            }
        }
        let mut q = [0.0; 4];
        if self.mu[2] > 0.0 {
            for &(r, w) in &self.s_nodes {
                let t = self.kernel.eval(s * r);
                q[0] += w * (df - 1.0) * t.value[1];
                q[1] += w * (t.value[0] - t.value[1]);
                q[2] += w * (df - 1.0) * t.deficit[1];
                q[3] += w * (t.deficit[0] - t.deficit[1]);
            }
        }
        let (m0, m1, m2) = (self.mu[0], self.mu[1] * self.c_d, self.mu[2] * self.c_d);
        RadialParts {
            b_l: m0 + m1 * p[0] + m2 * q[0],
            b_n: m0 + m1 * p[1] + m2 * q[1],
            g_l: m1 * p[2] + m2 * q[2],
            g_n: m1 * p[3] + m2 * q[3],
        }
    }

    /// `b(x)`; the identity at `x = 0`.
    pub fn covariance_tensor(&self, x: &[f64]) -> MatrixD {
        let mut out = MatrixD::zeros(self.d, self.d);
        self.tensor_into(x, false, out.as_mut_slice());
        out
    }

    /// `I − b(x)`, accurate for small `|x|`.
    pub fn deficit_tensor(&self, x: &[f64]) -> MatrixD {
        let mut out = MatrixD::zeros(self.d, self.d);
        self.tensor_into(x, true, out.as_mut_slice());
        out
    }

    /// Write `b(x)` (or `I − b(x)` when `deficit`) into a `d×d` buffer.
    /// The result is symmetric so storage order does not matter.
    pub fn tensor_into(&self, x: &[f64], deficit: bool, out: &mut [f64]) {
        let d = self.d;
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d * d);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            let diag = if deficit { 0.0 } else { 1.0 };
            out.fill(0.0);
            for i in 0..d {
                out[i * d + i] = diag;
            }
            return;
        }
        let parts = self.radial_parts(r2.sqrt());
        let (l, n) = if deficit {
            (parts.g_l, parts.g_n)
        } else {
            (parts.b_l, parts.b_n)
        };
        let k = (l - n) / r2;
        for i in 0..d {
            out[i * d + i] = k * x[i] * x[i] + n;
            for j in i + 1..d {
                let v = k * x[i] * x[j];
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
    }

    /// `βL`, `βN` and `λ` from the second moments of the measures.
    pub fn flow_constants(&self) -> Result<FlowConstants> {
        if self.trivial || self.mu[0] >= 1.0 {
            return Err(Error::model("flow constants are undefined for the trivial flow"));
        }
        let df = self.d as f64;
        let norm = df * (df + 2.0);
        let sp = match &self.m_p {
            Some(m) => m.moment(2)?,
            None => 0.0,
        };
        let ss = match &self.m_s {
            Some(m) => m.moment(2)?,
            None => 0.0,
        };
        let (mu1, mu2) = (self.mu[1], self.mu[2]);
        let beta_l = 3.0 * mu1 / norm * sp + (df - 1.0) * mu2 / norm * ss;
        let beta_n = mu1 / norm * sp + (df + 1.0) * mu2 / norm * ss;
        let lambda = (df - 1.0) * beta_n / 2.0 - beta_l / 2.0;
        Ok(FlowConstants {
            beta_l,
            beta_n,
            lambda,
        })
    }

    /// `Σ_{k,ℓ} ⟨b(x_k − x_ℓ) ξ_k, ξ_ℓ⟩`. Points and directions are flat
    /// arrays of `d`-vectors.
    pub fn psd_probe(&self, points: &[f64], directions: &[f64]) -> Result<f64> {
        let d = self.d;
        if points.is_empty() || !points.len().is_multiple_of(d) || points.len() != directions.len() {
            return Err(Error::param(
                "psd_probe needs equally many points and directions (at least one)",
            ));
        }
        let n = points.len() / d;
        let mut diff = vec![0.0; d];
        let mut b = vec![0.0; d * d];
        let mut total = 0.0;
        for k in 0..n {
            for l in 0..n {
                for i in 0..d {
                    diff[i] = points[k * d + i] - points[l * d + i];
                }
                self.tensor_into(&diff, false, &mut b);
                let xk = &directions[k * d..(k + 1) * d];
                let xl = &directions[l * d..(l + 1) * d];
                for i in 0..d {
                    for j in 0..d {
                        total += b[i * d + j] * xk[j] * xl[i];
                    }
                }
            }
        }
        Ok(total)
    }
}

fn check_part(name: &str, weight: f64, m: Option<&SpectralMeasure>, mass: f64) -> Result<()> {
    match (weight > 0.0, m) {
        (true, None) => Err(Error::model(format!(
            "{name} weight is positive but no {name} measure was given"
        ))),
        (false, Some(_)) => Err(Error::model(format!(
            "{name} measure given but its weight is zero"
        ))),
        (true, Some(m)) => {
            let got = m.total_mass();
            if (got - mass).abs() > MASS_TOL * mass {
                Err(Error::model(format!(
                    "{name} measure must have total mass {mass}, got {got}"
                )))
            } else {
                Ok(())
            }
        }
        (false, None) => Ok(()),
    }
}
