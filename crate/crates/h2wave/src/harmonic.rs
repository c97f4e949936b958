//! Harmonic maps `H² → H²` built from scaled holomorphic disk maps, with
//! tension field, Dirichlet energy and admissibility audits.
//!
//! The construction is analytic: a polynomial `f` on the Poincaré disk is
//! scaled by `μ` and conjugated into Iwasawa coordinates node by node. The
//! harmonic map equation is never solved on the grid; the grid only audits
//! the analytic map.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{disk_to_iwasawa, hyp_distance, iwasawa_to_disk, DomainPoint, TargetPoint};
use crate::grid::{
    gradient, integrate_volume, sup_norm_interior, Grid, MapField, ScalarField,
    VectorField,
};
use crate::{Error, Result};

/// Scaled holomorphic polynomial `z ↦ μ·Σ cₖ zᵏ` on the Poincaré disk.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HolomorphicSpec {
    /// Polynomial coefficients as `[re, im]` pairs, constant term first.
    pub coeffs: Vec<[f64; 2]>,
    /// Scale in `(0, 1]`. The value 1 is admitted so the identity map
    /// `f(z) = z, μ = 1` is expressible; the scaled image must still stay
    /// inside the closed disk.
    pub mu: f64,
}

impl HolomorphicSpec {
    pub fn new(coeffs: Vec<[f64; 2]>, mu: f64) -> Self {
        Self { coeffs, mu }
    }

    /// `μ = mu`, `f(z) = z`.
    pub fn scaled_identity(mu: f64) -> Self {
        Self::new(vec![[0.0, 0.0], [1.0, 0.0]], mu)
    }

    pub fn constant() -> Self {
        Self::new(vec![[0.0, 0.0]], 0.5)
    }

    /// Horner evaluation of `μ·f(z)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + Complex64::new(c[0], c[1]);
        }
        acc * self.mu
    }

    /// Reject scales outside `(0, 1]`, non-finite coefficients, and
    /// polynomials whose scaled image leaves the closed disk (sampled on
    /// `|z| = 1`, where the maximum modulus is attained).
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::Config(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        if self.coeffs.is_empty() {
            return Err(Error::Config("empty coefficient list".into()));
        }
        if self.coeffs.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(Error::Config("non-finite polynomial coefficient".into()));
        }
        let samples = 2048;
        let mut worst = 0.0f64;
        for k in 0..samples {
            let th = std::f64::consts::TAU * k as f64 / samples as f64;
            worst = worst.max(self.eval(Complex64::from_polar(1.0, th)).norm());
        }
        if worst > 1.0 {
            return Err(Error::Config(format!(
                "scaled image escapes the disk: sup_{{|z|=1}} |mu f| = {worst}"
            )));
        }
        Ok(())
    }
}

/// Admissibility audit of a candidate harmonic map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicMapReport {
    /// Radius of the geodesic ball around the target origin covering the
    /// image.
    pub r0: f64,
    /// `sup e^{ϱ r(x)} |dQ|(x)` with `r` the distance to the domain origin.
    pub sup_weighted_dq: f64,
    /// Whether the weighted sup is attained strictly inside the grid.
    pub sup_attained_interior: bool,
    pub dq_l2: f64,
    pub grad_dq_l2: f64,
    pub grad2_dq_l2: f64,
    pub tension_sup: f64,
}

/// Sample `p ↦ disk_to_iwasawa(μ f(iwasawa_to_disk(p)))` on the grid.
///
/// The result coincides with itself on the boundary by construction, so it
/// serves as its own anchor map.
pub fn construct_admissible(spec: &HolomorphicSpec, grid: &Arc<Grid>) -> Result<MapField> {
    spec.validate()?;
    let mut u1 = ScalarField::zeros(grid);
    let mut u2 = ScalarField::zeros(grid);
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let z = iwasawa_to_disk(grid.point(i, j));
            let w = spec.eval(z);
            if w.norm_sqr() >= 1.0 {
                return Err(Error::Config(format!(
                    "image escapes the disk at node ({i},{j}): |w| = {}",
                    w.norm()
                )));
            }
            let q = disk_to_iwasawa(w)?;
            let k = grid.idx(i, j);
            u1.data[k] = q.x1;
            u2.data[k] = q.x2;
        }
    }
    Ok(MapField { u1, u2 })
}

/// Tension field in coordinates:
/// `τ¹ = Δu¹ - 2(e^{2x2} ∂₁u¹ ∂₁u² + ∂₂u¹ ∂₂u²)`,
/// `τ² = Δu² + e^{-2u²}(e^{2x2} (∂₁u¹)² + (∂₂u¹)²)`.
/// Boundary layer masked to zero.
pub fn tension_field(u: &MapField) -> Result<VectorField> {
    u.validate("tension_field", 0, "s", 0.0)?;
    let g = u.grid().clone();
    let mut out = VectorField::zeros(&g);
    tension_into(u, &mut out);
    Ok(out)
}

/// Hot kernel behind [`tension_field`]; assumes finite input.
pub fn tension_into(u: &MapField, out: &mut VectorField) {
    let g = u.grid().clone();
    let n1 = g.n1;
    let inv_dx1sq = 1.0 / (g.dx1 * g.dx1);
    let inv_dx2sq = 1.0 / (g.dx2 * g.dx2);
    let inv2dx1 = 1.0 / (2.0 * g.dx1);
    let inv2dx2 = 1.0 / (2.0 * g.dx2);
    let u1 = &u.u1.data;
    let u2 = &u.u2.data;
    let (o1, o2) = (&mut out.v1.data, &mut out.v2.data);
    for (j, (row1, row2)) in o1.chunks_mut(n1).zip(o2.chunks_mut(n1)).enumerate() {
        if j == 0 || j == g.n2 - 1 {
            row1.fill(0.0);
            row2.fill(0.0);
            continue;
        }
            let e2 = g.e2x2[j];
            let row = j * n1;
            row1[0] = 0.0;
            row2[0] = 0.0;
            row1[n1 - 1] = 0.0;
            row2[n1 - 1] = 0.0;
            for i in 1..n1 - 1 {
                let k = row + i;
                let lap1 = e2 * (u1[k + 1] - 2.0 * u1[k] + u1[k - 1]) * inv_dx1sq
                    + (u1[k + n1] - 2.0 * u1[k] + u1[k - n1]) * inv_dx2sq
                    - (u1[k + n1] - u1[k - n1]) * inv2dx2;
                let lap2 = e2 * (u2[k + 1] - 2.0 * u2[k] + u2[k - 1]) * inv_dx1sq
                    + (u2[k + n1] - 2.0 * u2[k] + u2[k - n1]) * inv_dx2sq
                    - (u2[k + n1] - u2[k - n1]) * inv2dx2;
                let d1u1 = (u1[k + 1] - u1[k - 1]) * inv2dx1;
                let d2u1 = (u1[k + n1] - u1[k - n1]) * inv2dx2;
                let d1u2 = (u2[k + 1] - u2[k - 1]) * inv2dx1;
                let d2u2 = (u2[k + n1] - u2[k - n1]) * inv2dx2;
                let em2u2 = (-2.0 * u2[k]).exp();
                row1[i] = lap1 - 2.0 * (e2 * d1u1 * d1u2 + d2u1 * d2u2);
                row2[i] = lap2 + em2u2 * (e2 * d1u1 * d1u1 + d2u1 * d2u1);
            }
    }
}

/// Pointwise energy density
/// `|du|² = e^{2x2}(e^{-2u²}(∂₁u¹)² + (∂₁u²)²) + e^{-2u²}(∂₂u¹)² + (∂₂u²)²`.
pub fn energy_density(u: &MapField) -> ScalarField {
    let g = u.grid().clone();
    let (d1u1, d2u1) = gradient(&u.u1);
    let (d1u2, d2u2) = gradient(&u.u2);
    let mut out = ScalarField::zeros(&g);
    for j in 0..g.n2 {
        let e2 = g.e2x2[j];
        for i in 0..g.n1 {
            let k = g.idx(i, j);
            let em2u2 = (-2.0 * u.u2.data[k]).exp();
            out.data[k] = e2 * (em2u2 * d1u1.data[k] * d1u1.data[k] + d1u2.data[k] * d1u2.data[k])
                + em2u2 * d2u1.data[k] * d2u1.data[k]
                + d2u2.data[k] * d2u2.data[k];
        }
    }
    out
}

/// Dirichlet energy `½ ∫ |du|² dvol`.
pub fn dirichlet_energy(u: &MapField) -> f64 {
    0.5 * integrate_volume(&energy_density(u))
}

/// Covariant derivative of the differential:
/// `(∇du)^k_{ij} = ∂ᵢ∂ⱼu^k - Γ^l_{ij} ∂_l u^k + Γ̄^k_{pq} ∂ᵢu^p ∂ⱼu^q`.
///
/// Returns the six component fields ordered `(k, ij) = (1,11), (1,12),
/// (1,22), (2,11), (2,12), (2,22)`; entries are valid on the interior.
fn second_fundamental(u: &MapField) -> [ScalarField; 6] {
    let g = u.grid().clone();
    let (d1u1, d2u1) = gradient(&u.u1);
    let (d1u2, d2u2) = gradient(&u.u2);
    let (d11u1, d12u1) = gradient(&d1u1);
    let (_, d22u1) = gradient(&d2u1);
    let (d11u2, d12u2) = gradient(&d1u2);
    let (_, d22u2) = gradient(&d2u2);
    let mut out = [(); 6].map(|_| ScalarField::zeros(&g));
    for j in 0..g.n2 {
        let em2x2 = 1.0 / g.e2x2[j];
        for i in 0..g.n1 {
            let k = g.idx(i, j);
            let em2u2 = (-2.0 * u.u2.data[k]).exp();
            // Γ-corrections: (1,1) picks -Γ²₁₁ ∂₂u^k, (1,2) picks -Γ¹₁₂ ∂₁u^k
            let c11_1 = -em2x2 * d2u1.data[k];
            let c11_2 = -em2x2 * d2u2.data[k];
            let c12_1 = d1u1.data[k];
            let c12_2 = d1u2.data[k];
            // target corrections Γ̄¹: -(∂ᵢu¹∂ⱼu² + ∂ᵢu²∂ⱼu¹); Γ̄²: e^{-2u²}∂ᵢu¹∂ⱼu¹
            let t11_1 = -(d1u1.data[k] * d1u2.data[k] + d1u2.data[k] * d1u1.data[k]);
            let t12_1 = -(d1u1.data[k] * d2u2.data[k] + d1u2.data[k] * d2u1.data[k]);
            let t22_1 = -(d2u1.data[k] * d2u2.data[k] + d2u2.data[k] * d2u1.data[k]);
            let t11_2 = em2u2 * d1u1.data[k] * d1u1.data[k];
            let t12_2 = em2u2 * d1u1.data[k] * d2u1.data[k];
            let t22_2 = em2u2 * d2u1.data[k] * d2u1.data[k];
            out[0].data[k] = d11u1.data[k] + c11_1 + t11_1;
            out[1].data[k] = d12u1.data[k] + c12_1 + t12_1;
            out[2].data[k] = d22u1.data[k] + t22_1;
            out[3].data[k] = d11u2.data[k] + c11_2 + t11_2;
            out[4].data[k] = d12u2.data[k] + c12_2 + t12_2;
            out[5].data[k] = d22u2.data[k] + t22_2;
        }
    }
    out
}

/// Pointwise squared norm of a `(k, ij)` component family contracted with
/// `h^{ii} h^{jj}` and the target metric at `u`.
fn contract_sq(u: &MapField, t: &[ScalarField; 6], margin: usize) -> ScalarField {
    let g = u.grid().clone();
    let mut out = ScalarField::zeros(&g);
    for j in margin..g.n2 - margin {
        let h11 = g.e2x2[j];
        for i in margin..g.n1 - margin {
            let k = g.idx(i, j);
            let g11 = (-2.0 * u.u2.data[k]).exp();
            let mut acc = 0.0;
            for (sym, hij) in [(0, h11 * h11), (1, 2.0 * h11), (2, 1.0)] {
                acc += hij * (g11 * t[sym].data[k] * t[sym].data[k]
                    + t[sym + 3].data[k] * t[sym + 3].data[k]);
            }
            out.data[k] = acc;
        }
    }
    out
}

/// Audit a map against the admissibility requirements: compact image radius,
/// weighted gradient decay, and finiteness of `‖∇ᵏdQ‖_{L²}` for `k ≤ 2`.
pub fn admissibility_report(q: &MapField, rho: f64) -> Result<HarmonicMapReport> {
    if !(rho > 0.0) {
        return Err(Error::Config(format!("decay weight rho must be positive, got {rho}")));
    }
    q.validate("admissibility_report", 0, "s", 0.0)?;
    let g = q.grid().clone();
    let origin = DomainPoint::new(0.0, 0.0);

    let density = energy_density(q);
    let mut r0 = 0.0f64;
    let mut sup_weighted = 0.0f64;
    let mut sup_at = (0usize, 0usize);
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            let k = g.idx(i, j);
            let image = TargetPoint::new(q.u1.data[k], q.u2.data[k]);
            r0 = r0.max(hyp_distance(image.as_domain(), origin));
            let r = hyp_distance(g.point(i, j), origin);
            let w = (rho * r).exp() * density.data[k].max(0.0).sqrt();
            if w > sup_weighted {
                sup_weighted = w;
                sup_at = (i, j);
            }
        }
    }
    let sup_attained_interior = !g.is_boundary(sup_at.0, sup_at.1);

    let dq_l2 = integrate_volume(&density).max(0.0).sqrt();

    let t = second_fundamental(q);
    let grad_sq = contract_sq(q, &t, 1);
    let grad_dq_l2 = integrate_volume(&grad_sq).max(0.0).sqrt();

    // one further centered difference of the ∇dQ components, same pattern
    let mut t2 = [(); 6].map(|_| (ScalarField::zeros(&g), ScalarField::zeros(&g)));
    for (m, comp) in t.iter().enumerate() {
        t2[m] = {
            let (a, b) = gradient(comp);
            (a, b)
        };
    }
    let mut grad2_sq = ScalarField::zeros(&g);
    let (d1u1, d2u1) = gradient(&q.u1);
    let (d1u2, d2u2) = gradient(&q.u2);
    for j in 2..g.n2 - 2 {
        let h11 = g.e2x2[j];
        let em2x2 = 1.0 / h11;
        for i in 2..g.n1 - 2 {
            let k = g.idx(i, j);
            let g11 = (-2.0 * q.u2.data[k]).exp();
            let du = [
                [d1u1.data[k], d2u1.data[k]],
                [d1u2.data[k], d2u2.data[k]],
            ];
            // (i,j) in {11→0, 12/21→1, 22→2}
            let tt = |kk: usize, i_: usize, j_: usize| {
                let sym = match (i_, j_) {
                    (1, 1) => 0,
                    (2, 2) => 2,
                    _ => 1,
                };
                t[(kk - 1) * 3 + sym].data[k]
            };
            let dt = |kk: usize, i_: usize, j_: usize, m: usize| {
                let sym = match (i_, j_) {
                    (1, 1) => 0,
                    (2, 2) => 2,
                    _ => 1,
                };
                let f = &t2[(kk - 1) * 3 + sym];
                if m == 1 {
                    f.0.data[k]
                } else {
                    f.1.data[k]
                }
            };
            let gamma_dom = |l: usize, m: usize, i_: usize| -> f64 {
                // nonzero: Γ¹₁₂ = Γ¹₂₁ = -1, Γ²₁₁ = e^{-2x2}
                match (l, m, i_) {
                    (1, 1, 2) | (1, 2, 1) => -1.0,
                    (2, 1, 1) => em2x2,
                    _ => 0.0,
                }
            };
            let mut acc = 0.0;
            for m in 1..=2usize {
                let hmm = if m == 1 { h11 } else { 1.0 };
                for i_ in 1..=2usize {
                    let hii = if i_ == 1 { h11 } else { 1.0 };
                    for j_ in 1..=2usize {
                        let hjj = if j_ == 1 { h11 } else { 1.0 };
                        let mut comp = [0.0f64; 2];
                        for kk in 1..=2usize {
                            let mut v = dt(kk, i_, j_, m);
                            for l in 1..=2usize {
                                v -= gamma_dom(l, m, i_) * tt(kk, l, j_);
                                v -= gamma_dom(l, m, j_) * tt(kk, i_, l);
                            }
                            // + Γ̄^k_{pq} ∂_m u^p T^q_{ij}
                            if kk == 1 {
                                v += -(du[0][m - 1] * tt(2, i_, j_) + du[1][m - 1] * tt(1, i_, j_));
                            } else {
                                v += g11 * du[0][m - 1] * tt(1, i_, j_);
                            }
                            comp[kk - 1] = v;
                        }
                        acc += hmm * hii * hjj * (g11 * comp[0] * comp[0] + comp[1] * comp[1]);
                    }
                }
            }
            grad2_sq.data[k] = acc;
        }
    }
    let grad2_dq_l2 = integrate_volume(&grad2_sq).max(0.0).sqrt();

    let tension = tension_field(q)?;
    let tension_sup = sup_norm_interior(&tension.v1).max(sup_norm_interior(&tension.v2));

    Ok(HarmonicMapReport {
        r0,
        sup_weighted_dq: sup_weighted,
        sup_attained_interior,
        dq_l2,
        grad_dq_l2,
        grad2_dq_l2,
        tension_sup,
    })
}

/// Convenience: worst interior tension component.
pub fn tension_sup(u: &MapField) -> Result<f64> {
    let t = tension_field(u)?;
    Ok(sup_norm_interior(&t.v1).max(sup_norm_interior(&t.v2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::l2_norm;

    #[test]
    fn spec_parses_from_json() {
        let spec: HolomorphicSpec =
            serde_json::from_str(r#"{"coeffs": [[0.0,0.0],[1.0,0.0]], "mu": 0.1}"#).unwrap();
        assert_eq!(spec, HolomorphicSpec::scaled_identity(0.1));
        spec.validate().unwrap();
    }

    #[test]
    fn escaping_spec_is_rejected() {
        let spec = HolomorphicSpec::new(vec![[0.0, 0.0], [2.0, 0.0]], 0.9);
        assert!(spec.validate().is_err());
        assert!(HolomorphicSpec::new(vec![[1.0, 0.0]], 1.5).validate().is_err());
    }

    #[test]
    fn constant_spec_gives_constant_map() {
        let g = Grid::build(2.0, 2.0, 21, 21).unwrap();
        let spec = HolomorphicSpec::new(vec![[0.0, 0.0]], 0.3);
        let q = construct_admissible(&spec, &g).unwrap();
        assert_eq!(crate::grid::sup_norm(&q.u1), 0.0);
        assert_eq!(crate::grid::sup_norm(&q.u2), 0.0);
        let t = tension_field(&q).unwrap();
        assert_eq!(crate::grid::sup_norm(&t.v1), 0.0);
        assert_eq!(dirichlet_energy(&q), 0.0);
        let rep = admissibility_report(&q, 0.5).unwrap();
        assert_eq!(rep.r0, 0.0);
        assert_eq!(rep.dq_l2, 0.0);
        assert_eq!(rep.grad_dq_l2, 0.0);
    }

    #[test]
    fn identity_spec_reproduces_coordinates() {
        let g = Grid::build(3.0, 3.0, 31, 31).unwrap();
        let q = construct_admissible(&HolomorphicSpec::scaled_identity(1.0), &g).unwrap();
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let k = g.idx(i, j);
                assert!((q.u1.data[k] - g.x1s[i]).abs() < 1e-10, "u1 at ({i},{j})");
                assert!((q.u2.data[k] - g.x2s[j]).abs() < 1e-10, "u2 at ({i},{j})");
            }
        }
        // density ≡ 2 and tension ≈ 0 for the identity map
        let d = energy_density(&q);
        for k in 0..g.len() {
            assert!((d.data[k] - 2.0).abs() < 1e-8);
        }
        assert!(tension_sup(&q).unwrap() < 1e-7);
    }

    #[test]
    fn tension_vanishes_at_second_order_under_refinement() {
        let spec = HolomorphicSpec::scaled_identity(0.1);
        let sup = |n: usize| {
            let g = Grid::build(4.0, 4.0, n, n).unwrap();
            let q = construct_admissible(&spec, &g).unwrap();
            tension_sup(&q).unwrap()
        };
        let (e1, e2) = (sup(41), sup(81));
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "order {order} (e1={e1}, e2={e2})");
    }

    #[test]
    fn energy_monotone_in_scale() {
        let g = Grid::build(4.0, 4.0, 61, 61).unwrap();
        let e: Vec<f64> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&mu| {
                dirichlet_energy(
                    &construct_admissible(&HolomorphicSpec::scaled_identity(mu), &g).unwrap(),
                )
            })
            .collect();
        assert!(e[0] < e[1] && e[1] < e[2], "{e:?}");
    }

    #[test]
    fn image_radius_bounded_by_disk_radius() {
        let g = Grid::build(4.0, 4.0, 61, 61).unwrap();
        let spec = HolomorphicSpec::scaled_identity(0.1);
        let q = construct_admissible(&spec, &g).unwrap();
        let rep = admissibility_report(&q, 0.5).unwrap();
        let mut wmax = 0.0f64;
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                wmax = wmax.max(spec.eval(iwasawa_to_disk(g.point(i, j))).norm());
            }
        }
        // the bound is tight at the node attaining max|w|, so allow round-off
        assert!(
            rep.r0 <= 2.0 * wmax.atanh() + 1e-12,
            "r0={} bound={}",
            rep.r0,
            2.0 * wmax.atanh()
        );
    }

    #[test]
    fn weighted_sup_interior_for_admissible_boundary_for_identity() {
        let g = Grid::build(6.0, 6.0, 81, 81).unwrap();
        let q = construct_admissible(&HolomorphicSpec::scaled_identity(0.1), &g).unwrap();
        let rep = admissibility_report(&q, 0.5).unwrap();
        assert!(rep.sup_attained_interior, "decay check: sup at boundary");

        // identity map: |dQ| ≡ √2, weight e^{ϱr} unbounded with the extent
        let small = Grid::build(3.0, 3.0, 41, 41).unwrap();
        let qi_s = construct_admissible(&HolomorphicSpec::scaled_identity(1.0), &small).unwrap();
        let qi = construct_admissible(&HolomorphicSpec::scaled_identity(1.0), &g).unwrap();
        let rs = admissibility_report(&qi_s, 0.5).unwrap();
        let rl = admissibility_report(&qi, 0.5).unwrap();
        assert!(rl.sup_weighted_dq > 2.0 * rs.sup_weighted_dq);
        assert!(!rl.sup_attained_interior);
    }

    #[test]
    fn dirichlet_energy_regression_mu01() {
        // frozen from a 641² run on [-4,4]² (0.116055118047); the 161² value
        // must sit within its own O(dx²) offset of the fine answer
        let fine = 0.116055118047;
        let g = Grid::build(4.0, 4.0, 161, 161).unwrap();
        let q = construct_admissible(&HolomorphicSpec::scaled_identity(0.1), &g).unwrap();
        let e = dirichlet_energy(&q);
        assert!(
            (e - fine).abs() < 1e-4,
            "energy {e} drifted from frozen {fine}"
        );
    }

    #[test]
    fn admissibility_norms_are_finite_and_positive() {
        let g = Grid::build(4.0, 4.0, 81, 81).unwrap();
        let q = construct_admissible(&HolomorphicSpec::scaled_identity(0.1), &g).unwrap();
        let rep = admissibility_report(&q, 0.5).unwrap();
        assert!(rep.dq_l2 > 0.0 && rep.dq_l2.is_finite());
        assert!(rep.grad_dq_l2 > 0.0 && rep.grad_dq_l2.is_finite());
        assert!(rep.grad2_dq_l2 > 0.0 && rep.grad2_dq_l2.is_finite());
        assert!(rep.tension_sup < 1e-3);
        assert!(admissibility_report(&q, -0.5).is_err());
    }

    #[test]
    fn sum_of_weighted_gradients_matches_density() {
        // l2 of density vs directional pieces is exercised implicitly via
        // energy; spot check |du|² ≥ 0 and L² consistency
        let g = Grid::build(3.0, 3.0, 41, 41).unwrap();
        let q = construct_admissible(&HolomorphicSpec::scaled_identity(0.2), &g).unwrap();
        let d = energy_density(&q);
        assert!(d.data.iter().all(|&x| x >= 0.0));
        assert!((l2_norm(&d) > 0.0) && l2_norm(&d).is_finite());
    }
}
