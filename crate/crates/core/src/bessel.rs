//! Bessel functions of the first kind for integer and half-integer orders.
//!
//! Orders are `ν = k/2` with `0 ≤ ν ≤ 10`, enough for every dimension up to 16.
//!
//! * half-integer `ν`: trigonometric closed forms for `J_{±1/2}` followed by
//!   upward recurrence when `x ≥ ν + 1`, ascending series below that;
//! * integer `ν`: ascending series for `x ≤ 12`, Hankel asymptotics for
//!   `J_0`, `J_1` beyond, then upward recurrence (stable since `ν < 12 < x`).
//!
//! The scaled forms `Λ_ν(z) = J_ν(z) / z^ν` used by the covariance kernels have
//! their own entry points, including the deficit `Λ_ν(0) − Λ_ν(z)` evaluated
//! without cancellation near the origin.

use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};

/// Largest supported `2ν`.
pub const MAX_TWICE_ORDER: u32 = 20;

/// Switch point between ascending series and Hankel asymptotics (integer `ν`).
pub const SERIES_LIMIT: f64 = 12.0;

/// Bessel order `ν`, stored as `2ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Order(u32);

impl Order {
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice > MAX_TWICE_ORDER {
            return Err(Error::param(format!(
                "Bessel order {} exceeds the supported maximum {}",
                twice as f64 / 2.0,
                MAX_TWICE_ORDER as f64 / 2.0
            )));
        }
        Ok(Self(twice))
    }

    pub fn from_f64(nu: f64) -> Result<Self> {
        let twice = 2.0 * nu;
        if !(nu >= 0.0) || twice.fract() != 0.0 || !twice.is_finite() {
            return Err(Error::param(format!(
                "Bessel order must be a non-negative integer or half-integer, got {nu}"
            )));
        }
        Self::from_twice(twice as u32)
    }

    /// `ν = d/2` for dimension `d`.
    pub fn half_of(d: usize) -> Result<Self> {
        Self::from_twice(u32::try_from(d).map_err(|_| Error::param("dimension too large"))?)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// `ν - 1`, if non-negative.
    pub fn lower(self) -> Option<Self> {
        self.0.checked_sub(2).map(Self)
    }

    pub fn raise(self) -> Result<Self> {
        Self::from_twice(self.0 + 2)
    }
}

/// `Γ(k/2)` for `k ≥ 1`, exact up to rounding via `Γ(x+1) = xΓ(x)`.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1, "gamma_half needs k >= 1");
    let (mut g, mut x) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = k as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

/// `J_ν(x)` with validated arguments.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    let order = Order::from_f64(nu)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::param(format!(
            "Bessel argument must be finite and non-negative, got {x}"
        )));
    }
    Ok(j(order, x))
}

/// `J_ν(x)` for `x ≥ 0`.
pub fn j(order: Order, x: f64) -> f64 {
    if x == 0.0 {
        return if order.0 == 0 { 1.0 } else { 0.0 };
    }
    let nu = order.value();
    if order.is_integer() {
        if x <= SERIES_LIMIT {
            j_series(order, x)
        } else {
            let j0 = hankel(0.0, x);
            let j1 = hankel(1.0, x);
            recur_up(0.0, j0, j1, nu, x).1
        }
    } else if x < nu + 1.0 {
        j_series(order, x)
    } else {
        let (jm, jp) = half_base(x);
        recur_up(-0.5, jm, jp, nu, x).1
    }
}

/// `(J_{ν-1}(x), J_ν(x))` for `ν ≥ 1`, sharing work between the two orders.
fn j_pair(order: Order, x: f64) -> (f64, f64) {
    let lower = order.lower().expect("j_pair needs order >= 1");
    let nu = order.value();
    if order.is_integer() {
        if x <= SERIES_LIMIT {
            (j_series(lower, x), j_series(order, x))
        } else {
            let j0 = hankel(0.0, x);
            let j1 = hankel(1.0, x);
            recur_up(0.0, j0, j1, nu, x)
        }
    } else if x < nu + 1.0 {
        (j_series(lower, x), j_series(order, x))
    } else {
        let (jm, jp) = half_base(x);
        recur_up(-0.5, jm, jp, nu, x)
    }
}

/// `(J_{-1/2}(x), J_{1/2}(x))` in closed form.
fn half_base(x: f64) -> (f64, f64) {
    let amp = (FRAC_2_PI / x).sqrt();
    let (s, c) = x.sin_cos();
    (amp * c, amp * s)
}

/// Starting from `(J_{start}, J_{start+1})`, run
/// `J_{μ+1} = (2μ/x) J_μ − J_{μ−1}` up to `(J_{target−1}, J_{target})`.
fn recur_up(start: f64, j_start: f64, j_next: f64, target: f64, x: f64) -> (f64, f64) {
    if target == start {
        // only reachable for ν = 0; the "previous" order is unused by callers
        return (f64::NAN, j_start);
    }
    let mut prev = j_start;
    let mut cur = j_next;
    let mut mu = start + 1.0;
    while mu < target {
        let next = 2.0 * mu / x * cur - prev;
        prev = cur;
        cur = next;
        mu += 1.0;
    }
    (prev, cur)
}

/// Ascending power series, usable for any supported order.
///
/// Accurate to about `1e-12` of the envelope `√(2/πx)` for `x ≤ 12`; the
/// alternating terms cancel badly beyond that.
pub fn j_series(order: Order, x: f64) -> f64 {
    let nu = order.value();
    let lead = (0.5 * x).powf(nu) / gamma_half(order.0 + 2);
    lead * series_tail(nu, x, 0)
}

/// `Σ_{m ≥ first} (−x²/4)^m Γ(ν+1) / (m! Γ(m+ν+1))`.
fn series_tail(nu: f64, x: f64, first: u32) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut m = 0u32;
    while m < first {
        m += 1;
        term *= q / (m as f64 * (m as f64 + nu));
    }
    let mut sum = 0.0;
    let mut peak = 0.0f64;
    loop {
        sum += term;
        peak = peak.max(term.abs());
        m += 1;
        term *= q / (m as f64 * (m as f64 + nu));
        if term.abs() <= 1e-18 * peak && m as f64 > 0.5 * x {
            break;
        }
        if m > 400 || term == 0.0 {
            break;
        }
    }
    sum
}

/// Hankel asymptotic expansion, truncated at the smallest term.
fn hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    for k in 1..80u32 {
        let kf = k as f64;
        let next = term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        // k odd feeds Q with sign (−1)^((k−1)/2); k even feeds P with (−1)^(k/2)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    let (s, c) = chi.sin_cos();
    (FRAC_2_PI / x).sqrt() * (p * c - q * s)
}

/// `Λ_ν(0) = lim_{z→0} J_ν(z)/z^ν = 1 / (2^ν Γ(ν+1))`.
pub fn ratio_at_zero(order: Order) -> f64 {
    1.0 / (2f64.powf(order.value()) * gamma_half(order.0 + 2))
}

/// Below this argument the scaled functions come from the series directly.
const RATIO_SERIES_LIMIT: f64 = 1.0;

/// `Λ_ν(z) = J_ν(z) / z^ν`, continuous at `z = 0`.
pub fn ratio(order: Order, z: f64) -> f64 {
    if z <= RATIO_SERIES_LIMIT {
        ratio_at_zero(order) * series_tail(order.value(), z, 0)
    } else {
        j(order, z) / z.powf(order.value())
    }
}

/// `Λ_ν(0) − Λ_ν(z)`, accurate relative to its own size for small `z`.
pub fn ratio_deficit(order: Order, z: f64) -> f64 {
    if z <= RATIO_SERIES_LIMIT {
        -ratio_at_zero(order) * series_tail(order.value(), z, 1)
    } else {
        ratio_at_zero(order) - ratio(order, z)
    }
}

/// Scaled values and deficits at orders `ν−1, ν, ν+1`, the three orders the
/// covariance kernels use for `ν = d/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioTriplet {
    /// `Λ_{ν−1}, Λ_ν, Λ_{ν+1}` at `z`.
    pub value: [f64; 3],
    /// `Λ_μ(0) − Λ_μ(z)` for the same three orders.
    pub deficit: [f64; 3],
}

/// Precomputed constants for [`RatioTriplet`] evaluation at a fixed `ν ≥ 1`.
#[derive(Debug, Clone, Copy)]
pub struct TripletKernel {
    orders: [Order; 3],
    at_zero: [f64; 3],
}

impl TripletKernel {
    pub fn new(center: Order) -> Result<Self> {
        let lo = center
            .lower()
            .ok_or_else(|| Error::param("triplet kernel needs order >= 1"))?;
        let hi = center.raise()?;
        let orders = [lo, center, hi];
        Ok(Self {
            orders,
            at_zero: orders.map(ratio_at_zero),
        })
    }

    pub fn orders(&self) -> [Order; 3] {
        self.orders
    }

    pub fn eval(&self, z: f64) -> RatioTriplet {
        if z <= RATIO_SERIES_LIMIT {
            let mut value = [0.0; 3];
            let mut deficit = [0.0; 3];
            for i in 0..3 {
                let nu = self.orders[i].value();
                let tail = series_tail(nu, z, 1);
                deficit[i] = -self.at_zero[i] * tail;
                value[i] = self.at_zero[i] * (1.0 + tail);
            }
            return RatioTriplet { value, deficit };
        }
        let nu = self.orders[1].value();
        let (jm, jc) = j_pair(self.orders[1], z);
        let jp = 2.0 * nu / z * jc - jm;
        // z^(ν−1), z^ν, z^(ν+1)
        let pc = z.powf(nu);
        let pm = pc / z;
        let pp = pc * z;
        let value = [jm / pm, jc / pc, jp / pp];
        let deficit = [
            self.at_zero[0] - value[0],
            self.at_zero[1] - value[1],
            self.at_zero[2] - value[2],
        ];
        RatioTriplet { value, deficit }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord(nu: f64) -> Order {
        Order::from_f64(nu).unwrap()
    }

    #[test]
    fn gamma_half_values() {
        assert_eq!(gamma_half(2), 1.0);
        assert_eq!(gamma_half(8), 6.0);
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spot_values() {
        assert!(bessel_j(0.5, PI).unwrap().abs() < 1e-12);
        assert_eq!(bessel_j(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        // J_{3/2}(2) = √(2/(2π)) (sin 2 / 2 − cos 2)
        let x: f64 = 2.0;
        let closed = (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos());
        assert!((bessel_j(1.5, 2.0).unwrap() - closed).abs() < 1e-14);
        assert!((closed - 0.491_293_778_687_808_8).abs() < 1e-12);
        assert!(bessel_j(1.0, 3.831_705_970_207_512).unwrap().abs() < 1e-8);
        // J_1(1) from the series oracle
        assert!((bessel_j(1.0, 1.0).unwrap() - 0.440_050_585_744_933_5).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(bessel_j(0.3, 1.0).is_err());
        assert!(bessel_j(10.5, 1.0).is_err());
        assert!(bessel_j(1.0, -1.0).is_err());
        assert!(bessel_j(-0.5, 1.0).is_err());
        assert!(bessel_j(1.0, f64::NAN).is_err());
    }

    #[test]
    fn branches_agree_at_series_limit() {
        for nu in [0.0, 1.0, 2.0, 5.0] {
            let o = ord(nu);
            let a = j_series(o, SERIES_LIMIT);
            let b = {
                let j0 = hankel(0.0, SERIES_LIMIT);
                let j1 = hankel(1.0, SERIES_LIMIT);
                recur_up(0.0, j0, j1, nu, SERIES_LIMIT).1
            };
            assert!((a - b).abs() < 1e-11, "nu={nu}: {a} vs {b}");
        }
    }

    #[test]
    fn ratio_continuous_at_switch() {
        for twice in 2..=MAX_TWICE_ORDER {
            let o = Order::from_twice(twice).unwrap();
            let z = RATIO_SERIES_LIMIT;
            let series = ratio_at_zero(o) * series_tail(o.value(), z, 0);
            let direct = j(o, z) / z.powf(o.value());
            assert!(
                (series - direct).abs() <= 1e-13 * ratio_at_zero(o),
                "2nu={twice}"
            );
        }
    }

    #[test]
    fn deficit_small_argument() {
        // Λ_1(0) − Λ_1(z) = z²/16 − z⁴/384 + …
        let o = ord(1.0);
        let z = 1e-6;
        let d = ratio_deficit(o, z);
        assert!((d - (z * z / 16.0 - z.powi(4) / 384.0)).abs() <= 1e-15 * d);
        assert!(d > 0.0);
    }

    #[test]
    fn triplet_matches_scalar_calls() {
        for d in 2..=16usize {
            let k = TripletKernel::new(Order::half_of(d).unwrap()).unwrap();
            for &z in &[0.0, 1e-4, 0.3, 0.99, 1.01, 2.5, 7.0, 11.9, 12.1, 30.0, 49.0] {
                let t = k.eval(z);
                for (i, o) in k.orders().into_iter().enumerate() {
                    let want = ratio(o, z);
                    let scale = ratio_at_zero(o);
                    assert!(
                        (t.value[i] - want).abs() <= 1e-12 * scale,
                        "d={d} z={z} i={i}: {} vs {want}",
                        t.value[i]
                    );
                    assert!((t.deficit[i] - ratio_deficit(o, z)).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
