//! Closed-form geometry of `H²` in Iwasawa coordinates.
//!
//! The metric is `e^{-2x2} dx1² + dx2²`; the only nonzero Christoffel
//! symbols are `Γ¹₁₂ = Γ¹₂₁ = -1` and `Γ²₁₁ = e^{-2x2}`. The same formulas
//! serve the target copy of `H²` with `y2` in place of `x2`. All functions
//! here are pure and allocation-free.

use num_complex::Complex64;

use crate::{Error, Result};

/// Point on the domain `H²` in Iwasawa coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainPoint {
    pub x1: f64,
    pub x2: f64,
}

/// Point on the target `H²` in Iwasawa coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetPoint {
    pub y1: f64,
    pub y2: f64,
}

/// Tangent vector at a target point, components in the coordinate basis
/// `∂/∂y1, ∂/∂y2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub v1: f64,
    pub v2: f64,
}

/// Inverse metric, volume weight and Christoffel symbols at one point.
#[derive(Clone, Copy, Debug)]
pub struct MetricData {
    /// `h^{11} = e^{2x2}`.
    pub hinv11: f64,
    /// `h^{22} = 1`.
    pub hinv22: f64,
    /// `√det h = e^{-x2}`.
    pub vol_weight: f64,
    /// `Γ¹₁₂ = Γ¹₂₁` (constant `-1`).
    pub gamma1_12: f64,
    /// `Γ²₁₁ = e^{-2x2}`.
    pub gamma2_11: f64,
}

impl DomainPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    /// Half-plane coordinates `(ξ, η) = (x1, e^{x2})`.
    pub fn half_plane(self) -> (f64, f64) {
        (self.x1, self.x2.exp())
    }
}

impl TargetPoint {
    pub fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }

    pub fn as_domain(self) -> DomainPoint {
        DomainPoint::new(self.y1, self.y2)
    }

    pub const ORIGIN: TargetPoint = TargetPoint { y1: 0.0, y2: 0.0 };
}

impl TangentVector {
    pub fn new(v1: f64, v2: f64) -> Self {
        Self { v1, v2 }
    }
}

/// Metric data at a domain point.
pub fn domain_metric(p: DomainPoint) -> MetricData {
    let e2 = (2.0 * p.x2).exp();
    MetricData {
        hinv11: e2,
        hinv22: 1.0,
        vol_weight: (-p.x2).exp(),
        gamma1_12: -1.0,
        gamma2_11: 1.0 / e2,
    }
}

/// Metric data at a target point (identical formulas with `y2` for `x2`).
pub fn target_metric(y: TargetPoint) -> MetricData {
    domain_metric(y.as_domain())
}

/// Riemannian inner product of two tangent vectors at `y`:
/// `e^{-2y2}·v1·w1 + v2·w2`.
pub fn target_inner(y: TargetPoint, v: TangentVector, w: TangentVector) -> f64 {
    (-2.0 * y.y2).exp() * v.v1 * w.v1 + v.v2 * w.v2
}

/// Curvature wedge `(a∧b)c = ⟨a,c⟩b - ⟨b,c⟩a` at `y`.
///
/// This is the curvature operator of the target: `R(a,b)c = (a∧b)c` for the
/// hyperbolic plane with curvature -1.
pub fn curvature_wedge(
    a: TangentVector,
    b: TangentVector,
    c: TangentVector,
    y: TargetPoint,
) -> TangentVector {
    let ac = target_inner(y, a, c);
    let bc = target_inner(y, b, c);
    TangentVector::new(ac * b.v1 - bc * a.v1, ac * b.v2 - bc * a.v2)
}

/// Geodesic distance between two points of `H²`.
///
/// Uses the half-plane closed form `cosh d = 1 + (Δξ² + Δη²)/(2 η_p η_q)`
/// after the substitution `η = e^{x2}`, `ξ = x1`. Below `d ≈ 1e-6` the
/// closed form cancels catastrophically, so the first-order expansion
/// `√(e^{-2 x̄2} Δx1² + Δx2²)` takes over.
pub fn hyp_distance(p: DomainPoint, q: DomainPoint) -> f64 {
    let (xp, ep) = p.half_plane();
    let (xq, eq) = q.half_plane();
    let num = (xp - xq).powi(2) + (ep - eq).powi(2);
    let arg = num / (2.0 * ep * eq);
    if arg < 5e-13 {
        let mid = 0.5 * (p.x2 + q.x2);
        let dx1 = (p.x1 - q.x1) * (-mid).exp();
        let dx2 = p.x2 - q.x2;
        return dx1.hypot(dx2);
    }
    (1.0 + arg).acosh()
}

/// Distance between two points of the Poincaré disk with the metric
/// `4|dz|²/(1-|z|²)²` (curvature -1): `2 atanh |(z-w)/(1-conj(z) w)|`.
pub fn disk_distance(z: Complex64, w: Complex64) -> f64 {
    let m = (z - w) / (Complex64::new(1.0, 0.0) - z.conj() * w);
    2.0 * m.norm().atanh()
}

/// Poincaré disk to Iwasawa coordinates via the Cayley transform
/// `w = i(1+z)/(1-z)`, then `(x1, x2) = (Re w, log Im w)`.
pub fn disk_to_iwasawa(z: Complex64) -> Result<DomainPoint> {
    if z.norm_sqr() >= 1.0 {
        return Err(Error::Config(format!(
            "point {z} is not in the open unit disk"
        )));
    }
    let w = Complex64::i() * (Complex64::new(1.0, 0.0) + z) / (Complex64::new(1.0, 0.0) - z);
    Ok(DomainPoint::new(w.re, w.im.ln()))
}

/// Inverse of [`disk_to_iwasawa`]: `z = (w - i)/(w + i)` with
/// `w = x1 + i e^{x2}`.
pub fn iwasawa_to_disk(p: DomainPoint) -> Complex64 {
    let w = Complex64::new(p.x1, p.x2.exp());
    (w - Complex64::i()) / (w + Complex64::i())
}
