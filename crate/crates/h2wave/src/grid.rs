//! Truncated structured grid over Iwasawa coordinates.
//!
//! Node-centered uniform grid on `[-x1_ext, x1_ext] × [-x2_ext, x2_ext]`,
//! stored row-major with the `x1` index fastest. The outermost node layer is
//! the boundary; interior stencils are 2nd-order centered, boundary
//! gradients one-sided 2nd-order. Volume weights carry the hyperbolic
//! element `e^{-x2} dx1 dx2`; integrals apply trapezoid edge factors so the
//! quadrature stays 2nd-order on non-vanishing integrands.

use std::sync::Arc;

use crate::geometry::DomainPoint;
use crate::util::{first_nonfinite, pairwise_sum};
use crate::{Error, Result};

/// Uniform grid with precomputed metric tables.
#[derive(Debug)]
pub struct Grid {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
    pub n1: usize,
    pub n2: usize,
    pub dx1: f64,
    pub dx2: f64,
    /// `x1` coordinate per column index.
    pub x1s: Vec<f64>,
    /// `x2` coordinate per row index.
    pub x2s: Vec<f64>,
    /// `e^{2 x2}` per row index (the `h^{11}` table).
    pub e2x2: Vec<f64>,
    /// `e^{-x2} dx1 dx2` per node.
    pub vol_weights: Vec<f64>,
}

impl Grid {
    /// Symmetric rectangle `[-x1_ext, x1_ext] × [-x2_ext, x2_ext]` with
    /// `n1 × n2` nodes.
    pub fn build(x1_ext: f64, x2_ext: f64, n1: usize, n2: usize) -> Result<Arc<Grid>> {
        if !(x1_ext > 0.0) || !(x2_ext > 0.0) {
            return Err(Error::Config(format!(
                "grid extents must be positive, got ({x1_ext}, {x2_ext})"
            )));
        }
        if n1 < 5 || n2 < 5 {
            return Err(Error::Config(format!(
                "grid needs at least 5 nodes per axis, got ({n1}, {n2})"
            )));
        }
        let dx1 = 2.0 * x1_ext / (n1 - 1) as f64;
        let dx2 = 2.0 * x2_ext / (n2 - 1) as f64;
        let x1s: Vec<f64> = (0..n1).map(|i| -x1_ext + i as f64 * dx1).collect();
        let x2s: Vec<f64> = (0..n2).map(|j| -x2_ext + j as f64 * dx2).collect();
        let e2x2: Vec<f64> = x2s.iter().map(|&x2| (2.0 * x2).exp()).collect();
        let cell = dx1 * dx2;
        let mut vol_weights = Vec::with_capacity(n1 * n2);
        for &x2 in &x2s {
            let w = (-x2).exp() * cell;
            vol_weights.extend(std::iter::repeat(w).take(n1));
        }
        Ok(Arc::new(Grid {
            x1_min: -x1_ext,
            x1_max: x1_ext,
            x2_min: -x2_ext,
            x2_max: x2_ext,
            n1,
            n2,
            dx1,
            dx2,
            x1s,
            x2s,
            e2x2,
            vol_weights,
        }))
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n1 - 1 || j == self.n2 - 1
    }

    pub fn point(&self, i: usize, j: usize) -> DomainPoint {
        DomainPoint::new(self.x1s[i], self.x2s[j])
    }

    /// Number of interior nodes.
    pub fn interior_len(&self) -> usize {
        (self.n1 - 2) * (self.n2 - 2)
    }

    /// Trapezoid quadrature factor for a node (1 interior, 1/2 face, 1/4
    /// corner).
    #[inline]
    pub fn quad_factor(&self, i: usize, j: usize) -> f64 {
        let fi = if i == 0 || i == self.n1 - 1 { 0.5 } else { 1.0 };
        let fj = if j == 0 || j == self.n2 - 1 { 0.5 } else { 1.0 };
        fi * fj
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.n1 == other.n1
            && self.n2 == other.n2
            && self.x1_min == other.x1_min
            && self.x2_min == other.x2_min
            && self.x1_max == other.x1_max
            && self.x2_max == other.x2_max
    }
}

/// Scalar field sampled at the grid nodes.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                data.push(f(grid.x1s[i], grid.x2s[j]));
            }
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    /// Reject NaN/Inf eagerly, naming the first offending node.
    pub fn validate(&self, stage: &'static str, step: usize, coord: &'static str, value: f64) -> Result<()> {
        match first_nonfinite(&self.data) {
            None => Ok(()),
            Some(node) => Err(Error::Blowup {
                stage,
                step,
                coord,
                value,
                node,
            }),
        }
    }
}

/// Map `u: H² → H²` stored as two target-coordinate scalar fields.
#[derive(Clone, Debug)]
pub struct MapField {
    pub u1: ScalarField,
    pub u2: ScalarField,
}

impl MapField {
    pub fn constant(grid: &Arc<Grid>, y1: f64, y2: f64) -> Self {
        Self {
            u1: ScalarField::from_fn(grid, |_, _| y1),
            u2: ScalarField::from_fn(grid, |_, _| y2),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.u1.grid
    }

    pub fn validate(&self, stage: &'static str, step: usize, coord: &'static str, value: f64) -> Result<()> {
        self.u1.validate(stage, step, coord, value)?;
        self.u2.validate(stage, step, coord, value)
    }

    /// Largest boundary-layer deviation from `anchor`.
    pub fn anchor_defect(&self, anchor: &MapField) -> f64 {
        let g = self.grid();
        let mut worst = 0.0f64;
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                if g.is_boundary(i, j) {
                    let d = (self.u1.at(i, j) - anchor.u1.at(i, j))
                        .abs()
                        .max((self.u2.at(i, j) - anchor.u2.at(i, j)).abs());
                    worst = worst.max(d);
                }
            }
        }
        worst
    }
}

/// Section of the pullback tangent bundle: components in the target
/// coordinate basis at `u(x)`.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub v1: ScalarField,
    pub v2: ScalarField,
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            v1: ScalarField::zeros(grid),
            v2: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.v1.grid
    }
}

/// 2nd-order partial derivatives `(∂₁f, ∂₂f)`: centered in the interior,
/// one-sided 3-point at the boundary layer.
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = &f.grid;
    let (n1, n2) = (g.n1, g.n2);
    let mut d1 = ScalarField::zeros(g);
    let mut d2 = ScalarField::zeros(g);
    let inv2dx1 = 1.0 / (2.0 * g.dx1);
    let inv2dx2 = 1.0 / (2.0 * g.dx2);
    for j in 0..n2 {
        let row = j * n1;
        for i in 0..n1 {
            let k = row + i;
            d1.data[k] = if i == 0 {
                (-3.0 * f.data[k] + 4.0 * f.data[k + 1] - f.data[k + 2]) * inv2dx1
            } else if i == n1 - 1 {
                (3.0 * f.data[k] - 4.0 * f.data[k - 1] + f.data[k - 2]) * inv2dx1
            } else {
                (f.data[k + 1] - f.data[k - 1]) * inv2dx1
            };
            d2.data[k] = if j == 0 {
                (-3.0 * f.data[k] + 4.0 * f.data[k + n1] - f.data[k + 2 * n1]) * inv2dx2
            } else if j == n2 - 1 {
                (3.0 * f.data[k] - 4.0 * f.data[k - n1] + f.data[k - 2 * n1]) * inv2dx2
            } else {
                (f.data[k + n1] - f.data[k - n1]) * inv2dx2
            };
        }
    }
    (d1, d2)
}

/// Laplace–Beltrami operator `Δf = e^{2x2} ∂₁₁f + ∂₂₂f - ∂₂f` on interior
/// nodes; the boundary layer is set to zero (masked).
pub fn laplace_beltrami(f: &ScalarField) -> ScalarField {
    let g = &f.grid;
    let (n1, n2) = (g.n1, g.n2);
    let mut out = ScalarField::zeros(g);
    let inv_dx1sq = 1.0 / (g.dx1 * g.dx1);
    let inv_dx2sq = 1.0 / (g.dx2 * g.dx2);
    let inv2dx2 = 1.0 / (2.0 * g.dx2);
    for j in 1..n2 - 1 {
        let row = j * n1;
        let c1 = g.e2x2[j] * inv_dx1sq;
        for i in 1..n1 - 1 {
            let k = row + i;
            let dxx = f.data[k + 1] - 2.0 * f.data[k] + f.data[k - 1];
            let dyy = f.data[k + n1] - 2.0 * f.data[k] + f.data[k - n1];
            let dy = (f.data[k + n1] - f.data[k - n1]) * inv2dx2;
            out.data[k] = c1 * dxx + inv_dx2sq * dyy - dy;
        }
    }
    out
}

/// Hyperbolic-volume integral `∫ f dvol` by trapezoid quadrature in fixed
/// node order.
pub fn integrate_volume(f: &ScalarField) -> f64 {
    let g = &f.grid;
    let mut terms = Vec::with_capacity(g.len());
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            let k = g.idx(i, j);
            terms.push(f.data[k] * g.vol_weights[k] * g.quad_factor(i, j));
        }
    }
    pairwise_sum(&terms)
}

/// `L²(dvol)` norm.
pub fn l2_norm(f: &ScalarField) -> f64 {
    let g = &f.grid;
    let mut terms = Vec::with_capacity(g.len());
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            let k = g.idx(i, j);
            terms.push(f.data[k] * f.data[k] * g.vol_weights[k] * g.quad_factor(i, j));
        }
    }
    pairwise_sum(&terms).max(0.0).sqrt()
}

/// Sup norm over all nodes (boundary included).
pub fn sup_norm(f: &ScalarField) -> f64 {
    f.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Sup norm over interior nodes only.
pub fn sup_norm_interior(f: &ScalarField) -> f64 {
    sup_norm_margin(f, 1)
}

/// Sup norm skipping `margin` node layers on every side (residuals of
/// stacked stencils are only clean away from the one-sided boundary ring).
pub fn sup_norm_margin(f: &ScalarField, margin: usize) -> f64 {
    let g = &f.grid;
    let mut m = 0.0f64;
    for j in margin..g.n2 - margin {
        for i in margin..g.n1 - margin {
            m = m.max(f.at(i, j).abs());
        }
    }
    m
}

/// Pointwise hyperbolic distance between two maps on the same grid.
pub fn distance_field(a: &MapField, b: &MapField) -> ScalarField {
    use crate::geometry::hyp_distance;
    let g = a.grid().clone();
    let mut out = ScalarField::zeros(&g);
    for k in 0..g.len() {
        out.data[k] = hyp_distance(
            DomainPoint::new(a.u1.data[k], a.u2.data[k]),
            DomainPoint::new(b.u1.data[k], b.u2.data[k]),
        );
    }
    out
}

/// `sup_x d_{H²}(a(x), b(x))` over all nodes.
pub fn sup_distance(a: &MapField, b: &MapField) -> f64 {
    sup_norm(&distance_field(a, b))
}

/// Norm dispatch for `p ∈ {2, ∞}`; anything else is an error.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p == 2.0 {
        Ok(l2_norm(f))
    } else if p.is_infinite() && p > 0.0 {
        Ok(sup_norm(f))
    } else {
        Err(Error::UnsupportedNorm(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_11() -> Arc<Grid> {
        Grid::build(1.0, 1.0, 21, 21).unwrap()
    }

    #[test]
    fn build_spacings_and_counts() {
        let g = Grid::build(4.0, 4.0, 81, 81).unwrap();
        assert!((g.dx1 - 0.1).abs() < 1e-14);
        assert!((g.dx2 - 0.1).abs() < 1e-14);
        assert_eq!(g.len(), 6561);
        assert!(Grid::build(4.0, 4.0, 4, 81).is_err());
        assert!(Grid::build(-1.0, 4.0, 81, 81).is_err());
    }

    #[test]
    fn vol_weight_at_zero_height() {
        let g = grid_11();
        // x2 = 0 row: weight is exactly dx1·dx2
        let j = 10;
        assert_eq!(g.x2s[j], 0.0);
        assert!((g.vol_weights[g.idx(3, j)] - g.dx1 * g.dx2).abs() < 1e-16);
    }

    #[test]
    fn total_volume_matches_closed_form() {
        // ∫_{[-1,1]²} e^{-x2} = 2(e - 1/e)
        // composite trapezoid error ≈ (b-a)·dx²/12·f'' ≤ 4.5e-3 at dx = 0.1
        let exact = 2.0 * (1f64.exp() - (-1f64).exp());
        for (n, tol) in [(21, 5e-3), (41, 1.5e-3)] {
            let g = Grid::build(1.0, 1.0, n, n).unwrap();
            let one = ScalarField::from_fn(&g, |_, _| 1.0);
            let v = integrate_volume(&one);
            assert!((v - exact).abs() < tol, "n={n}: {v} vs {exact}");
        }
        // O(dx²): quartering dx shrinks error ~16x
        let g1 = Grid::build(1.0, 1.0, 21, 21).unwrap();
        let g2 = Grid::build(1.0, 1.0, 81, 81).unwrap();
        let e1 = (integrate_volume(&ScalarField::from_fn(&g1, |_, _| 1.0)) - exact).abs();
        let e2 = (integrate_volume(&ScalarField::from_fn(&g2, |_, _| 1.0)) - exact).abs();
        assert!(e2 < e1 / 10.0, "e1={e1}, e2={e2}");
    }

    #[test]
    fn gradient_exact_on_linears_and_quadratics() {
        let g = grid_11();
        let f = ScalarField::from_fn(&g, |x1, _| x1);
        let (d1, d2) = gradient(&f);
        for k in 0..g.len() {
            assert!((d1.data[k] - 1.0).abs() < 1e-13);
            assert!(d2.data[k].abs() < 1e-13);
        }
        let f = ScalarField::from_fn(&g, |_, x2| x2 * x2);
        let (_, d2) = gradient(&f);
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                assert!((d2.at(i, j) - 2.0 * g.x2s[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_second_order_on_sine() {
        let err = |n: usize| {
            let g = Grid::build(1.0, 1.0, n, n).unwrap();
            let f = ScalarField::from_fn(&g, |x1, _| x1.sin());
            let (d1, _) = gradient(&f);
            let mut worst = 0.0f64;
            for j in 1..g.n2 - 1 {
                for i in 1..g.n1 - 1 {
                    worst = worst.max((d1.at(i, j) - g.x1s[i].cos()).abs());
                }
            }
            worst
        };
        let (e1, e2) = (err(21), err(41));
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn laplacian_examples() {
        let g = grid_11();
        let f = ScalarField::from_fn(&g, |_, _| 3.25);
        assert_eq!(sup_norm(&laplace_beltrami(&f)), 0.0);

        // Δ x2 = -∂₂ x2 = -1 exactly in the interior
        let f = ScalarField::from_fn(&g, |_, x2| x2);
        let lap = laplace_beltrami(&f);
        for j in 1..g.n2 - 1 {
            for i in 1..g.n1 - 1 {
                assert!((lap.at(i, j) + 1.0).abs() < 1e-12);
            }
        }

        // Δ e^{x2} = 0; discrete error O(dx2²)
        let f = ScalarField::from_fn(&g, |_, x2| x2.exp());
        let r1 = sup_norm_interior(&laplace_beltrami(&f));
        let g2 = Grid::build(1.0, 1.0, 41, 41).unwrap();
        let f2 = ScalarField::from_fn(&g2, |_, x2| x2.exp());
        let r2 = sup_norm_interior(&laplace_beltrami(&f2));
        // residual ≈ e^{x2}·dx2²/12 ≈ 2e-3 near the top row at dx2 = 0.1
        assert!(r1 < 5e-3 && (r1 / r2).log2() > 1.9, "r1={r1}, r2={r2}");
    }

    #[test]
    fn laplacian_exact_on_x1_quadratics() {
        let g = grid_11();
        let f = ScalarField::from_fn(&g, |x1, _| x1 * x1);
        let lap = laplace_beltrami(&f);
        for j in 1..g.n2 - 1 {
            for i in 1..g.n1 - 1 {
                assert!((lap.at(i, j) - 2.0 * g.e2x2[j]).abs() < 1e-10 * g.e2x2[j]);
            }
        }
    }

    #[test]
    fn norms_and_errors() {
        let g = Grid::build(4.0, 4.0, 21, 21).unwrap();
        let zero = ScalarField::zeros(&g);
        assert_eq!(l2_norm(&zero), 0.0);
        assert_eq!(integrate_volume(&zero), 0.0);
        let f = ScalarField::from_fn(&g, |x1, _| x1);
        assert_eq!(sup_norm(&f), 4.0); // attained on the boundary
        assert!(lp_norm(&f, 3.0).is_err());
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 4.0);
    }

    #[test]
    fn integration_by_parts_self_adjointness() {
        // |∫(Δf)g - ∫f(Δg)| = O(dx²) for fields vanishing near the boundary
        let run = |n: usize| {
            let g = Grid::build(2.0, 2.0, n, n).unwrap();
            let bump = |c1: f64, c2: f64| {
                move |x1: f64, x2: f64| {
                    let r2 = (x1 - c1).powi(2) + (x2 - c2).powi(2);
                    (-r2 / 0.18).exp()
                }
            };
            let f = ScalarField::from_fn(&g, bump(0.2, -0.1));
            let h = ScalarField::from_fn(&g, bump(-0.3, 0.25));
            let lf = laplace_beltrami(&f);
            let lh = laplace_beltrami(&h);
            let mut prod1 = ScalarField::zeros(&g);
            let mut prod2 = ScalarField::zeros(&g);
            for k in 0..g.len() {
                prod1.data[k] = lf.data[k] * h.data[k];
                prod2.data[k] = f.data[k] * lh.data[k];
            }
            (integrate_volume(&prod1) - integrate_volume(&prod2)).abs()
        };
        let (e1, e2) = (run(41), run(81));
        assert!(e2 < e1 / 3.0, "e1={e1}, e2={e2}");
        assert!(e1 < 1e-2);
    }

    #[test]
    fn reductions_are_bit_identical() {
        let g = grid_11();
        let f = ScalarField::from_fn(&g, |x1, x2| (x1 * 3.7).sin() + x2.cos());
        assert_eq!(l2_norm(&f), l2_norm(&f.clone()));
        assert_eq!(integrate_volume(&f), integrate_volume(&f));
    }

    #[test]
    fn validate_names_first_bad_node() {
        let g = grid_11();
        let mut f = ScalarField::zeros(&g);
        f.data[37] = f64::NAN;
        let err = f.validate("test", 5, "s", 0.1).unwrap_err();
        match err {
            Error::Blowup { node, step, .. } => {
                assert_eq!(node, 37);
                assert_eq!(step, 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
