//! Condition (C)_ρ, the mean inward field on a sphere and the squeeze
//! functional `∬ ⟨b(ρθ − ρφ)θ, φ⟩ dσ(θ) dσ(φ)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bessel::{self, gamma_half, Order};
use crate::covariance::{IbfModel, MAX_DIM, MIN_DIM};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spectral::DEFAULT_QUAD_NODES;

/// Default half-width of the band around each scaled Bessel zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;
/// Largest argument searched for Bessel zeros.
pub const MAX_ZERO_ARG: f64 = 200.0;
const ZERO_GRID: f64 = 0.05;
const ZERO_BISECT_TOL: f64 = 1e-10;

/// Quadrature for the uniform probability measure on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    d: usize,
    /// Flat `n·d` array of unit vectors.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    layout: Layout,
}

/// Symmetry of the node set, used to collapse pair sums.
#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// `n` equal angles on the circle.
    Ring { n: usize },
    /// Gauss–Legendre polar cosines times `n_az` equal azimuths.
    Product { polar: Vec<f64>, polar_weights: Vec<f64>, n_az: usize },
    Scattered,
}

impl SphereRule {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.d..(k + 1) * self.d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes.chunks(self.d).zip(self.weights.iter().copied())
    }
}

/// Outcome of the support test for condition (C)_ρ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    /// `M_P` mass lying outside the bands around the scaled zeros.
    pub witness_mass: f64,
    /// Zeros `z` of `J_{d/2}` that were tested (scaled locations are `z/ρ`).
    pub zero_locations_checked: Vec<f64>,
}

/// Positive zeros of `J_ν` in `(0, upper]`.
pub fn bessel_zeros(order: Order, upper: f64) -> Result<Vec<f64>> {
    if !(upper.is_finite() && upper > 0.0 && upper <= MAX_ZERO_ARG) {
        return Err(Error::param(format!(
            "zero search bound must lie in (0, {MAX_ZERO_ARG}], got {upper}"
        )));
    }
    let f = |x: f64| bessel::j(order, x);
    let mut zeros = Vec::new();
    let steps = (upper / ZERO_GRID).ceil() as usize;
    let mut a = ZERO_GRID;
    let mut fa = f(a);
    for i in 2..=steps + 1 {
        let b = (i as f64 * ZERO_GRID).min(upper);
        if b <= a {
            break;
        }
        let fb = f(b);
        if fb == 0.0 {
            zeros.push(b);
        } else if fa != 0.0 && fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            while hi - lo > ZERO_BISECT_TOL {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    Ok(zeros)
}

/// Decide condition (C)_ρ: `μ1 > 0` and `M_P` puts mass off the set
/// `{s : J_{d/2}(ρs) = 0}`.
pub fn check_condition(model: &IbfModel, rho: f64, tol: f64) -> Result<ConditionReport> {
    check_rho(rho)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::param(format!("tolerance must be positive, got {tol}")));
    }
    let m_p = match model.potential() {
        Some(m) if model.mu1() > 0.0 => m,
        _ => {
            return Ok(ConditionReport {
                satisfied: false,
                witness_mass: 0.0,
                zero_locations_checked: Vec::new(),
            })
        }
    };
    let upper = rho * m_p.max_location() + 1.0;
    if upper > MAX_ZERO_ARG {
        return Err(Error::param(format!(
            "rho times the largest spectral location must stay below {}",
            MAX_ZERO_ARG - 1.0
        )));
    }
    let zeros = bessel_zeros(Order::half_of(model.dim())?, upper)?;
    let bands: Vec<(f64, f64)> = zeros
        .iter()
        .map(|z| {
            let s = z / rho;
            let half = tol * s.max(1.0);
            (s - half, s + half)
        })
        .collect();

    let mut witness = 0.0;
    for atom in m_p.atoms() {
        if !bands.iter().any(|&(lo, hi)| atom.location > lo && atom.location < hi) {
            witness += atom.weight;
        }
    }
    for piece in m_p.density() {
        let covered: f64 = bands
            .iter()
            .map(|&(lo, hi)| (hi.min(piece.hi) - lo.max(piece.lo)).max(0.0))
            .sum();
        witness += piece.height * ((piece.hi - piece.lo) - covered).max(0.0);
    }
    Ok(ConditionReport {
        satisfied: witness > tol * m_p.total_mass(),
        witness_mass: witness,
        zero_locations_checked: zeros,
    })
}

/// Quadrature rule for `σ`: equal angles for `d = 2`, Gauss–Legendre in the
/// polar cosine times equal azimuths for `d = 3`, seeded Monte Carlo above.
pub fn sphere_rule(d: usize, resolution: usize, mc_seed: Option<u64>) -> Result<SphereRule> {
    if !(MIN_DIM..=MAX_DIM).contains(&d) {
        return Err(Error::param(format!(
            "sphere rule dimension must lie in [{MIN_DIM}, {MAX_DIM}], got {d}"
        )));
    }
    if resolution == 0 {
        return Err(Error::param("sphere rule resolution must be positive"));
    }
    let n = resolution;
    let (nodes, weights, layout) = match d {
        2 => {
            let mut nodes = Vec::with_capacity(2 * n);
            for k in 0..n {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                nodes.extend([a.cos(), a.sin()]);
            }
            (nodes, vec![1.0 / n as f64; n], Layout::Ring { n })
        }
        3 => {
            let gl = GaussLegendre::new(n);
            let mut nodes = Vec::with_capacity(3 * n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (&c, &w) in gl.nodes.iter().zip(&gl.weights) {
                let r = (1.0 - c * c).max(0.0).sqrt();
                for k in 0..n {
                    let a = std::f64::consts::TAU * k as f64 / n as f64;
                    nodes.extend([r * a.cos(), r * a.sin(), c]);
                    weights.push(0.5 * w / n as f64);
                }
            }
            let layout = Layout::Product {
                polar: gl.nodes.clone(),
                polar_weights: gl.weights.iter().map(|w| 0.5 * w).collect(),
                n_az: n,
            };
            (nodes, weights, layout)
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(mc_seed.unwrap_or(0));
            let mut nodes = Vec::with_capacity(d * n);
            let mut v = vec![0.0; d];
            for _ in 0..n {
                loop {
                    for x in v.iter_mut() {
                        *x = StandardNormal.sample(&mut rng);
                    }
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        nodes.extend(v.iter().map(|x| x / norm));
                        break;
                    }
                }
            }
            (nodes, vec![1.0 / n as f64; n], Layout::Scattered)
        }
    };
    Ok(SphereRule {
        d,
        nodes,
        weights,
        layout,
    })
}

/// `V(x) = −Σ_k w_k b(ρ θ_k − x) θ_k`.
pub fn mean_inward_field(model: &IbfModel, rho: f64, rule: &SphereRule, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    mean_inward_field_into(model, rho, rule, x, &mut out);
    out
}

pub fn mean_inward_field_into(
    model: &IbfModel,
    rho: f64,
    rule: &SphereRule,
    x: &[f64],
    out: &mut [f64],
) {
    let d = model.dim();
    debug_assert_eq!(rule.dim(), d);
    let mut diff = vec![0.0; d];
    let mut b = vec![0.0; d * d];
    out.fill(0.0);
    for (node, w) in rule.iter() {
        for i in 0..d {
            diff[i] = rho * node[i] - x[i];
        }
        model.tensor_into(&diff, false, &mut b);
        for i in 0..d {
            let row = &b[i * d..(i + 1) * d];
            out[i] -= w * row.iter().zip(node).map(|(a, t)| a * t).sum::<f64>();
        }
    }
}

/// Quadrature value (`lhs`) and Bessel-integral value (`rhs`) of the squeeze
/// functional.
pub fn squeeze_functional(model: &IbfModel, rho: f64, rule: &SphereRule) -> Result<(f64, f64)> {
    check_rho(rho)?;
    let d = model.dim();
    if rule.dim() != d {
        return Err(Error::param(format!(
            "sphere rule dimension {} does not match model dimension {d}",
            rule.dim()
        )));
    }
    let lhs = match &rule.layout {
        Layout::Ring { n } => {
            let n = *n;
            let mut acc = 1.0;
            for m in 1..n {
                let half = std::f64::consts::PI * m as f64 / n as f64;
                acc += pair_term(model, rho, 2.0 * half.sin().powi(2));
            }
            acc / n as f64
        }
        Layout::Product {
            polar,
            polar_weights,
            n_az,
        } => {
            let n_az = *n_az;
            let angles: Vec<f64> = polar.iter().map(|c| c.acos()).collect();
            let sines: Vec<f64> = angles.iter().map(|a| a.sin()).collect();
            let az: Vec<f64> = (0..n_az)
                .map(|m| 2.0 * (std::f64::consts::PI * m as f64 / n_az as f64).sin().powi(2))
                .collect();
            let mut acc = 0.0;
            for i in 0..polar.len() {
                for j in i..polar.len() {
                    let base = 2.0 * (0.5 * (angles[i] - angles[j])).sin().powi(2);
                    let mut ring = 0.0;
                    for (m, &a) in az.iter().enumerate() {
                        ring += if i == j && m == 0 {
                            1.0
                        } else {
                            pair_term(model, rho, base + sines[i] * sines[j] * a)
                        };
                    }
                    let mult = if i == j { 1.0 } else { 2.0 };
                    acc += mult * polar_weights[i] * polar_weights[j] * ring;
                }
            }
            acc / n_az as f64
        }
        Layout::Scattered => pairwise_lhs(model, rho, rule),
    };

    let rhs = match model.potential() {
        Some(m) if model.mu1() > 0.0 => {
            let order = Order::half_of(d)?;
            let g = gamma_half(d as u32);
            let pref = model.mu1() * 2f64.powi(d as i32 - 2) * g * g;
            let integral = m.integrate(
                |s| {
                    let z = rho * s;
                    let v = z * bessel::ratio(order, z);
                    v * v
                },
                DEFAULT_QUAD_NODES,
            )?;
            pref * integral
        }
        _ => 0.0,
    };
    Ok((lhs, rhs))
}

/// `⟨b(ρθ − ρφ)θ, φ⟩` for unit vectors with `1 − θ·φ = gap`.
fn pair_term(model: &IbfModel, rho: f64, gap: f64) -> f64 {
    let c = 1.0 - gap;
    let p = model.radial_parts(rho * (2.0 * gap).sqrt());
    c * p.b_n - 0.5 * gap * (p.b_l - p.b_n)
}

/// Direct double sum over all node pairs.
fn pairwise_lhs(model: &IbfModel, rho: f64, rule: &SphereRule) -> f64 {
    let d = rule.dim();
    let n = rule.len();
    let mut diff = vec![0.0; d];
    let mut b = vec![0.0; d * d];
    let mut lhs = 0.0;
    for k in 0..n {
        let tk = rule.node(k);
        let wk = rule.weights()[k];
        // diagonal term: b(0) = I
        lhs += wk * wk;
        let mut row_acc = 0.0;
        for l in k + 1..n {
            let tl = rule.node(l);
            for i in 0..d {
                diff[i] = rho * (tk[i] - tl[i]);
            }
            model.tensor_into(&diff, false, &mut b);
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += b[i * d + j] * tk[j] * tl[i];
                }
            }
            row_acc += rule.weights()[l] * q;
        }
        lhs += 2.0 * wk * row_acc;
    }
    lhs
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("rho must be positive, got {rho}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralMeasure;

    const J1_ZERO: f64 = 3.831705970207512;

    fn radial_component(model: &IbfModel, rho: f64, rule: &SphereRule, theta: &[f64]) -> f64 {
        let x: Vec<f64> = theta.iter().map(|t| rho * t).collect();
        let v = mean_inward_field(model, rho, rule, &x);
        v.iter().zip(theta).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn symmetric_layouts_match_pairwise_sum() {
        let p = SpectralMeasure::new(
            vec![crate::spectral::Atom { location: 1.7, weight: 1.0 }],
            vec![crate::spectral::DensityPiece { lo: 0.3, hi: 2.0, height: 0.5 }],
        )
        .unwrap();
        let s = SpectralMeasure::atom(2.3, 1.0).unwrap();
        for (d, res) in [(2, 40), (3, 9)] {
            let m = IbfModel::normalized(d, [0.2, 0.5, 0.3], Some(&p), Some(&s)).unwrap();
            let rule = sphere_rule(d, res, None).unwrap();
            for rho in [0.4, 1.0, 2.5] {
                let (fast, _) = squeeze_functional(&m, rho, &rule).unwrap();
                let slow = pairwise_lhs(&m, rho, &rule);
                assert!((fast - slow).abs() < 1e-13, "d={d} rho={rho}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn zeros_of_j1_and_half() {
        let z = bessel_zeros(Order::from_twice(2).unwrap(), 4.0).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0] - J1_ZERO).abs() < 1e-9);
        assert!(bessel_zeros(Order::from_twice(2).unwrap(), 1.0).unwrap().is_empty());
        let z = bessel_zeros(Order::from_twice(1).unwrap(), 10.0).unwrap();
        assert_eq!(z.len(), 3);
        for (k, zk) in z.iter().enumerate() {
            assert!((zk - (k + 1) as f64 * std::f64::consts::PI).abs() < 1e-9);
        }
        assert!(bessel_zeros(Order::from_twice(2).unwrap(), 250.0).is_err());
    }

    #[test]
    fn condition_examples() {
        let m = IbfModel::solenoidal_atom(2, 1.0).unwrap();
        assert!(!check_condition(&m, 1.0, DEFAULT_ZERO_TOL).unwrap().satisfied);

        let m = IbfModel::potential_atom(2, J1_ZERO).unwrap();
        let r = check_condition(&m, 1.0, DEFAULT_ZERO_TOL).unwrap();
        assert!(!r.satisfied);
        assert_eq!(r.witness_mass, 0.0);

        let dens = SpectralMeasure::uniform(1.0, 2.0, 1.0).unwrap();
        let m = IbfModel::normalized(2, [0.0, 1.0, 0.0], Some(&dens), None).unwrap();
        let r = check_condition(&m, 1.0, DEFAULT_ZERO_TOL).unwrap();
        assert!(r.satisfied);
        assert!((r.witness_mass - 2.0).abs() < 1e-12);

        let m = IbfModel::potential_atom(2, 1.0).unwrap();
        assert!(check_condition(&m, 1.0, DEFAULT_ZERO_TOL).unwrap().satisfied);
    }

    #[test]
    fn sphere_rules_are_centered_probability_measures() {
        let r = sphere_rule(2, 4, None).unwrap();
        assert_eq!(r.len(), 4);
        assert!((r.node(1)[1] - 1.0).abs() < 1e-15 && r.node(1)[0].abs() < 1e-15);
        for (d, res) in [(2, 17), (3, 16), (5, 200)] {
            let r = sphere_rule(d, res, Some(7)).unwrap();
            let total: f64 = r.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (node, _) in r.iter() {
                let n2: f64 = node.iter().map(|x| x * x).sum();
                assert!((n2 - 1.0).abs() < 1e-12);
            }
            if d <= 3 {
                for i in 0..d {
                    let m: f64 = r.iter().map(|(n, w)| w * n[i]).sum();
                    assert!(m.abs() < 1e-12, "d={d}: {m}");
                }
            }
        }
        let r = sphere_rule(3, 16, None).unwrap();
        let second: f64 = r.iter().map(|(n, w)| w * n[0] * n[0]).sum();
        assert!((second - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn atom_squeeze_value() {
        let m = IbfModel::potential_atom(2, 1.0).unwrap();
        let rule = sphere_rule(2, 256, None).unwrap();
        let (lhs, rhs) = squeeze_functional(&m, 1.0, &rule).unwrap();
        let j1 = 0.4400505857449335;
        assert!((rhs - 2.0 * j1 * j1).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-6);

        let rule = sphere_rule(2, 64, None).unwrap();
        for k in 0..8 {
            let a = 0.37 * k as f64;
            let v = radial_component(&m, 1.0, &rule, &[a.cos(), a.sin()]);
            assert!((v + 2.0 * j1 * j1).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn degenerate_and_trivial_functional() {
        let rule = sphere_rule(2, 256, None).unwrap();
        let m = IbfModel::potential_atom(2, J1_ZERO).unwrap();
        let (lhs, rhs) = squeeze_functional(&m, 1.0, &rule).unwrap();
        assert!(rhs.abs() < 1e-10 && lhs.abs() < 1e-8);

        let m = IbfModel::trivial_translation(2).unwrap();
        let (lhs, rhs) = squeeze_functional(&m, 1.0, &rule).unwrap();
        assert!(lhs.abs() < 1e-12 && rhs == 0.0);
        let v = mean_inward_field(&m, 1.0, &rule, &[0.0, 0.0]);
        assert!(v.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn solenoidal_field_is_tangent_on_sphere() {
        let m = IbfModel::solenoidal_atom(3, 1.3).unwrap();
        let rule = sphere_rule(3, 16, None).unwrap();
        let v = radial_component(&m, 0.8, &rule, &[0.6, 0.0, 0.8]);
        assert!(v.abs() < 1e-10, "{v}");
    }
}
