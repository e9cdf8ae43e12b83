//! Finite spectral measures on `(0, ∞)`.
//!
//! A measure is a finite list of weighted atoms plus piecewise-constant
//! density pieces. Every mass and moment integral is closed-form for this
//! class; general integrands go through Gauss–Legendre quadrature per piece.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Node count per density piece used when none is requested explicitly.
pub const DEFAULT_QUAD_NODES: usize = 32;

/// Highest moment order accepted by [`SpectralMeasure::moment`].
pub const MAX_MOMENT: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub height: f64,
}

/// Atoms plus piecewise-constant density on `(0, ∞)`.
///
/// Invariants (checked by [`SpectralMeasure::new`]): atom locations are
/// positive, pieces satisfy `0 < lo < hi`, all weights and heights are
/// non-negative and finite, and the total mass is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureDoc", into = "MeasureDoc")]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    density: Vec<DensityPiece>,
}

/// Wire form: `{"atoms": [[s, w], ...], "density": [[lo, hi, h], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureDoc {
    #[serde(default)]
    atoms: Vec<[f64; 2]>,
    #[serde(default)]
    density: Vec<[f64; 3]>,
}

impl TryFrom<MeasureDoc> for SpectralMeasure {
    type Error = Error;

    fn try_from(doc: MeasureDoc) -> Result<Self> {
        SpectralMeasure::new(
            doc.atoms
                .iter()
                .map(|&[location, weight]| Atom { location, weight })
                .collect(),
            doc.density
                .iter()
                .map(|&[lo, hi, height]| DensityPiece { lo, hi, height })
                .collect(),
        )
    }
}

impl From<SpectralMeasure> for MeasureDoc {
    fn from(m: SpectralMeasure) -> Self {
        MeasureDoc {
            atoms: m.atoms.iter().map(|a| [a.location, a.weight]).collect(),
            density: m.density.iter().map(|p| [p.lo, p.hi, p.height]).collect(),
        }
    }
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<Atom>, density: Vec<DensityPiece>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if !(a.location.is_finite() && a.location > 0.0) {
                return Err(Error::param(format!(
                    "atom {i}: location must be positive and finite, got {}",
                    a.location
                )));
            }
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::param(format!(
                    "atom {i}: weight must be non-negative and finite, got {}",
                    a.weight
                )));
            }
        }
        for (i, p) in density.iter().enumerate() {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo > 0.0 && p.lo < p.hi) {
                return Err(Error::param(format!(
                    "density piece {i}: need 0 < lo < hi, got [{}, {}]",
                    p.lo, p.hi
                )));
            }
            if !(p.height.is_finite() && p.height >= 0.0) {
                return Err(Error::param(format!(
                    "density piece {i}: height must be non-negative and finite, got {}",
                    p.height
                )));
            }
        }
        let m = Self { atoms, density };
        let mass = m.total_mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::param(format!(
                "total mass must be positive and finite, got {mass}"
            )));
        }
        let m4 = m.moment_unchecked(4);
        if !m4.is_finite() {
            return Err(Error::param("fourth moment is not finite"));
        }
        Ok(m)
    }

    /// A single atom of weight `weight` at `location`.
    pub fn atom(location: f64, weight: f64) -> Result<Self> {
        Self::new(vec![Atom { location, weight }], Vec::new())
    }

    /// Constant density `height` on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, height: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![DensityPiece { lo, hi, height }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    pub fn has_density(&self) -> bool {
        self.density.iter().any(|p| p.height > 0.0)
    }

    /// Largest point of the support (atoms with zero weight included).
    pub fn max_location(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.location)
            .chain(self.density.iter().map(|p| p.hi))
            .fold(0.0, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight).sum();
        let pieces: f64 = self.density.iter().map(|p| p.height * (p.hi - p.lo)).sum();
        atoms + pieces
    }

    /// `∫ s^k dM`, exact.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k > MAX_MOMENT {
            return Err(Error::param(format!(
                "moment order {k} exceeds the supported maximum {MAX_MOMENT}"
            )));
        }
        Ok(self.moment_unchecked(k))
    }

    fn moment_unchecked(&self, k: u32) -> f64 {
        if k == 0 {
            return self.total_mass();
        }
        let e = k as i32;
        let atoms: f64 = self.atoms.iter().map(|a| a.weight * a.location.powi(e)).sum();
        let pieces: f64 = self
            .density
            .iter()
            .map(|p| p.height * (p.hi.powi(e + 1) - p.lo.powi(e + 1)) / (e + 1) as f64)
            .sum();
        atoms + pieces
    }

    /// `∫ f dM` with `nodes_per_piece` Gauss–Legendre nodes on each density
    /// piece; atoms are evaluated exactly.
    pub fn integrate<F>(&self, f: F, nodes_per_piece: usize) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        if nodes_per_piece == 0 {
            return Err(Error::param("quadrature needs at least one node per piece"));
        }
        let mut total = 0.0;
        for &(s, w) in &self.discretize(nodes_per_piece) {
            let v = f(s);
            if !v.is_finite() {
                return Err(Error::Evaluation { abscissa: s });
            }
            total += w * v;
        }
        Ok(total)
    }

    /// Atom list representing the quadrature of this measure: the atoms
    /// themselves followed by Gauss–Legendre nodes of every piece, weighted
    /// by `height * w_gl`.
    pub fn discretize(&self, nodes_per_piece: usize) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .filter(|a| a.weight > 0.0)
            .map(|a| (a.location, a.weight))
            .collect();
        if !self.density.is_empty() {
            let gl = GaussLegendre::new(nodes_per_piece.max(1));
            for p in self.density.iter().filter(|p| p.height > 0.0) {
                out.extend(gl.on_interval(p.lo, p.hi).map(|(s, w)| (s, p.height * w)));
            }
        }
        out
    }

    /// Copy with every weight and height multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: a.weight * factor,
                })
                .collect(),
            density: self
                .density
                .iter()
                .map(|p| DensityPiece {
                    height: p.height * factor,
                    ..*p
                })
                .collect(),
        }
    }

    fn normalized_to(&self, target: f64) -> Result<Self> {
        let mass = self.total_mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Normalization(format!("total mass is {mass}")));
        }
        Ok(self.scaled(target / mass))
    }

    /// Scaled copy with total mass `d` (potential part normalization).
    pub fn normalize_potential(&self, d: usize) -> Result<Self> {
        check_dimension(d)?;
        self.normalized_to(d as f64)
    }

    /// Scaled copy with total mass `d / (d - 1)` (solenoidal part normalization).
    pub fn normalize_solenoidal(&self, d: usize) -> Result<Self> {
        check_dimension(d)?;
        self.normalized_to(d as f64 / (d as f64 - 1.0))
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Normalization(format!("dimension must be at least 2, got {d}")));
    }
    Ok(())
}
