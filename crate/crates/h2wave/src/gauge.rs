//! Caloric gauge: orthonormal frames transported along the heat flow,
//! differential fields, connection coefficients and their identities.
//!
//! Frames solve `∇ₛΩⱼ = 0` per node alongside the heat integration and are
//! aligned post hoc to the limit frame `Θ(Q)` by one constant-in-s rotation
//! per node (constant rotations commute with the transport). Connection
//! matrices are skew, so each is stored as the single scalar
//! `a_α = ⟨∇_α e₂, e₁⟩`, the `[·]¹₂` entry; with that convention the limit
//! connection of a harmonic map is `a_i^∞ = -e^{-Q²} ∂ᵢQ¹` and the matrix
//! acts as `(Aφ)¹ = a φ², (Aφ)² = -a φ¹`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fit::decay_fit;
use crate::grid::{
    gradient, l2_norm, sup_distance, sup_norm, sup_norm_interior, Grid, MapField, ScalarField,
    VectorField,
};
use crate::heat::{run_heat_flow_observed, HeatConfig, HeatObserver, HeatTrajectory};
use crate::{Error, Result};

/// Orthonormal frame `(e₁, e₂)` attached at `u(x)`, components in the
/// target coordinate basis.
#[derive(Clone, Debug)]
pub struct FrameField {
    pub grid: Arc<Grid>,
    pub e1_1: Vec<f64>,
    pub e1_2: Vec<f64>,
    pub e2_1: Vec<f64>,
    pub e2_2: Vec<f64>,
}

/// `e^{-2u²} a1·b1 + a2·b2` at node `k` of `u`.
#[inline]
fn inner_at(u: &MapField, k: usize, a1: f64, a2: f64, b1: f64, b2: f64) -> f64 {
    (-2.0 * u.u2.data[k]).exp() * a1 * b1 + a2 * b2
}

impl FrameField {
    /// The global frame `Θ₁ = e^{u²}∂/∂y₁, Θ₂ = ∂/∂y₂` at `u`.
    pub fn theta(u: &MapField) -> Self {
        let g = u.grid().clone();
        let n = g.len();
        let mut f = Self {
            grid: g,
            e1_1: vec![0.0; n],
            e1_2: vec![0.0; n],
            e2_1: vec![0.0; n],
            e2_2: vec![1.0; n],
        };
        for k in 0..n {
            f.e1_1[k] = u.u2.data[k].exp();
        }
        f
    }

    /// Worst deviation of `⟨e_i, e_j⟩_{g(u)}` from `δ_ij` over all nodes.
    pub fn orthonormality_defect(&self, u: &MapField) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for k in 0..n {
            let g11 = inner_at(u, k, self.e1_1[k], self.e1_2[k], self.e1_1[k], self.e1_2[k]);
            let g22 = inner_at(u, k, self.e2_1[k], self.e2_2[k], self.e2_1[k], self.e2_2[k]);
            let g12 = inner_at(u, k, self.e1_1[k], self.e1_2[k], self.e2_1[k], self.e2_2[k]);
            worst = worst.max((g11 - 1.0).abs()).max((g22 - 1.0).abs()).max(g12.abs());
        }
        worst
    }

    /// Gram-Schmidt against the metric at `u`.
    pub fn reorthonormalize(&mut self, u: &MapField) {
        let n = self.grid.len();
        for k in 0..n {
            let n1 = inner_at(u, k, self.e1_1[k], self.e1_2[k], self.e1_1[k], self.e1_2[k]).sqrt();
            self.e1_1[k] /= n1;
            self.e1_2[k] /= n1;
            let proj = inner_at(u, k, self.e2_1[k], self.e2_2[k], self.e1_1[k], self.e1_2[k]);
            self.e2_1[k] -= proj * self.e1_1[k];
            self.e2_2[k] -= proj * self.e1_2[k];
            let n2 = inner_at(u, k, self.e2_1[k], self.e2_2[k], self.e2_1[k], self.e2_2[k]).sqrt();
            self.e2_1[k] /= n2;
            self.e2_2[k] /= n2;
        }
    }

    /// Rotate each node's frame by the angle field: `e₁ ← cos φ e₁ + sin φ e₂`,
    /// `e₂ ← -sin φ e₁ + cos φ e₂`.
    pub fn rotate(&mut self, cos_phi: &[f64], sin_phi: &[f64]) {
        let n = self.grid.len();
        for k in 0..n {
            let (c, s) = (cos_phi[k], sin_phi[k]);
            let (a1, a2) = (self.e1_1[k], self.e1_2[k]);
            let (b1, b2) = (self.e2_1[k], self.e2_2[k]);
            self.e1_1[k] = c * a1 + s * b1;
            self.e1_2[k] = c * a2 + s * b2;
            self.e2_1[k] = -s * a1 + c * b1;
            self.e2_2[k] = -s * a2 + c * b2;
        }
    }
}

/// Frame components of a pullback vector field: `c1 = ⟨·, e₁⟩`,
/// `c2 = ⟨·, e₂⟩`.
#[derive(Clone, Debug)]
pub struct FramePair {
    pub c1: ScalarField,
    pub c2: ScalarField,
}

impl FramePair {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            c1: ScalarField::zeros(grid),
            c2: ScalarField::zeros(grid),
        }
    }

    pub fn sup_interior(&self) -> f64 {
        sup_norm_interior(&self.c1).max(sup_norm_interior(&self.c2))
    }

    pub fn sup(&self) -> f64 {
        sup_norm(&self.c1).max(sup_norm(&self.c2))
    }

    pub fn l2(&self) -> f64 {
        l2_norm(&self.c1).hypot(l2_norm(&self.c2))
    }
}

/// Spatially enriched gauge data at one heat time of one time slice.
#[derive(Clone, Debug)]
pub struct GaugeSnapshot {
    pub s: f64,
    /// Frame components of `∂₁u`.
    pub phi1: FramePair,
    /// Frame components of `∂₂u`.
    pub phi2: FramePair,
    /// Frame components of `τ(u) = ∂ₛu`.
    pub phis: FramePair,
    /// `[A₁]¹₂`.
    pub a1: ScalarField,
    /// `[A₂]¹₂`.
    pub a2: ScalarField,
}

/// Result of one frame-transport run along a heat flow.
pub struct TransportRun {
    pub heat: HeatTrajectory,
    /// Frames at the heat snapshot times, already aligned to `Θ(Q)`.
    pub frames: Vec<(f64, FrameField)>,
    pub reortho_count: usize,
    /// Largest orthonormality defect seen before re-orthonormalization.
    pub max_defect: f64,
    /// Determinant range of the change-of-frame matrix against `Θ` at the
    /// final state (orthogonality check; should be `1 ± 1e-8`).
    pub det_range: (f64, f64),
    /// Largest alignment rotation angle (radians).
    pub max_rotation: f64,
    /// `sup_x d(u(s_end), Q)` — the committed alignment error scale.
    pub final_mismatch: f64,
}

/// Frame transport in angle form.
///
/// Any orthonormal frame at `u` is `Ω = R(θ)Θ(u)` for one angle per node,
/// and `∇ₛΩ = 0` reduces to the scalar quadrature `dθ/ds = -e^{-u²} τ¹`
/// (the connection of the moving `Θ(u(s))` along the flow). Reconstructed
/// frames are exactly orthonormal, so no re-orthonormalization is ever
/// required, and the limit alignment is the constant shift `θ ↦ θ - θ_end`.
struct Transporter {
    theta: Vec<f64>,
    prev: Option<(f64, MapField, VectorField)>,
    /// `(s, θ(s), u(s), τ(s))` at snapshot times.
    snaps: Vec<(f64, Vec<f64>, MapField, VectorField)>,
}

impl Transporter {
    #[inline]
    fn connection_rate(u: &MapField, tau: &VectorField, k: usize) -> f64 {
        (-u.u2.data[k]).exp() * tau.v1.data[k]
    }
}

impl HeatObserver for Transporter {
    fn on_state(&mut self, _step: usize, s: f64, u: &MapField, tension: &VectorField, snap: bool) {
        if let Some((s0, u0, tau0)) = self.prev.take() {
            let ds = s - s0;
            for k in 0..self.theta.len() {
                let c0 = Self::connection_rate(&u0, &tau0, k);
                let c1 = Self::connection_rate(u, tension, k);
                self.theta[k] -= 0.5 * ds * (c0 + c1);
            }
        }
        if snap {
            self.snaps
                .push((s, self.theta.clone(), u.clone(), tension.clone()));
        }
        self.prev = Some((s, u.clone(), tension.clone()));
    }
}

/// Build `R(θ)Θ(u)` with `R(θ)e₁ = cos θ e₁ + sin θ e₂` etc.
fn frame_from_angle(u: &MapField, theta: &[f64]) -> FrameField {
    let mut f = FrameField::theta(u);
    let n = f.grid.len();
    let cos: Vec<f64> = (0..n).map(|k| theta[k].cos()).collect();
    let sin: Vec<f64> = (0..n).map(|k| theta[k].sin()).collect();
    f.rotate(&cos, &sin);
    f
}

/// Run the heat flow from `u0` (anchored to `q`) and transport the frame
/// family `Ω(s)` along it, starting from `Θ(u0)` and aligned post hoc so
/// the limit frame is `Θ(Q)`.
pub fn transport_frames(u0: &MapField, q: &MapField, cfg: &HeatConfig) -> Result<TransportRun> {
    let n = u0.grid().len();
    let mut tr = Transporter {
        theta: vec![0.0; n],
        prev: None,
        snaps: Vec::new(),
    };
    let heat = run_heat_flow_observed(u0, q, cfg, &mut tr)?;
    if !heat.converged {
        return Err(Error::Config(format!(
            "gauge undefined: heat flow did not converge (final sup ∂ₛu = {:.3e} at s = {})",
            heat.diagnostics.last().map_or(f64::NAN, |d| d.sup_dsu),
            heat.final_s
        )));
    }

    // constant-in-s alignment: the residual angle against Θ at the final
    // state is θ_end itself
    let theta_end = tr.theta;
    let max_rotation = theta_end.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    let mut frames = Vec::with_capacity(tr.snaps.len());
    let mut max_defect = 0.0f64;
    let mut reortho_count = 0usize;
    let mut det_min = f64::INFINITY;
    let mut det_max = f64::NEG_INFINITY;
    for (s, theta, u, _tau) in tr.snaps {
        let shifted: Vec<f64> = theta.iter().zip(&theta_end).map(|(t, te)| t - te).collect();
        let mut frame = frame_from_angle(&u, &shifted);
        // reconstructed frames are orthonormal by construction; keep the
        // corrective path as a guard
        let defect = frame.orthonormality_defect(&u);
        max_defect = max_defect.max(defect);
        if defect > 1e-10 {
            frame.reorthonormalize(&u);
            reortho_count += 1;
        }
        // change-of-frame determinant against Θ(u): rotations have det 1
        let th = FrameField::theta(&u);
        for k in 0..n {
            let m11 = inner_at(&u, k, frame.e1_1[k], frame.e1_2[k], th.e1_1[k], th.e1_2[k]);
            let m12 = inner_at(&u, k, frame.e1_1[k], frame.e1_2[k], th.e2_1[k], th.e2_2[k]);
            let m21 = inner_at(&u, k, frame.e2_1[k], frame.e2_2[k], th.e1_1[k], th.e1_2[k]);
            let m22 = inner_at(&u, k, frame.e2_1[k], frame.e2_2[k], th.e2_1[k], th.e2_2[k]);
            let det = m11 * m22 - m12 * m21;
            det_min = det_min.min(det);
            det_max = det_max.max(det);
        }
        frames.push((s, frame));
    }

    Ok(TransportRun {
        final_mismatch: sup_distance(&heat.final_u, q),
        heat,
        frames,
        reortho_count,
        max_defect,
        det_range: (det_min, det_max),
        max_rotation,
    })
}

/// Frame components of a coordinate vector field `(w1, w2)` at `u`.
pub fn frame_components(u: &MapField, frame: &FrameField, w1: &[f64], w2: &[f64]) -> FramePair {
    let g = u.grid().clone();
    let mut out = FramePair::zeros(&g);
    for k in 0..g.len() {
        out.c1.data[k] = inner_at(u, k, w1[k], w2[k], frame.e1_1[k], frame.e1_2[k]);
        out.c2.data[k] = inner_at(u, k, w1[k], w2[k], frame.e2_1[k], frame.e2_2[k]);
    }
    out
}

/// Connection scalar `a = ½(⟨∇e₂, e₁⟩ - ⟨∇e₁, e₂⟩)` for one direction,
/// with `∇e_j = ∂e_j + Γ̄(∂u, e_j)`.
///
/// The skew-symmetrized pairing is exactly invariant under constant frame
/// rotations even at the discrete level; the one-sided pairing only up to
/// O(dx²). Both agree in the continuum since `⟨∇e₂,e₁⟩ = -⟨∇e₁,e₂⟩`.
#[allow(clippy::too_many_arguments)]
fn connection_scalar(
    u: &MapField,
    frame: &FrameField,
    du1: &[f64],
    du2: &[f64],
    de1_1: &ScalarField,
    de1_2: &ScalarField,
    de2_1: &ScalarField,
    de2_2: &ScalarField,
) -> ScalarField {
    let g = u.grid().clone();
    let mut out = ScalarField::zeros(&g);
    for k in 0..g.len() {
        let em = (-2.0 * u.u2.data[k]).exp();
        // Γ̄(X, V): comp1 = -(X¹V² + X²V¹), comp2 = e^{-2u²} X¹ V¹
        let n2_1 = de2_1.data[k] - (du1[k] * frame.e2_2[k] + du2[k] * frame.e2_1[k]);
        let n2_2 = de2_2.data[k] + em * du1[k] * frame.e2_1[k];
        let n1_1 = de1_1.data[k] - (du1[k] * frame.e1_2[k] + du2[k] * frame.e1_1[k]);
        let n1_2 = de1_2.data[k] + em * du1[k] * frame.e1_1[k];
        let fwd = inner_at(u, k, n2_1, n2_2, frame.e1_1[k], frame.e1_2[k]);
        let bwd = inner_at(u, k, n1_1, n1_2, frame.e2_1[k], frame.e2_2[k]);
        out.data[k] = 0.5 * (fwd - bwd);
    }
    out
}

fn diff_scaled(next: &[f64], prev: &[f64], scale: f64) -> Vec<f64> {
    next.iter()
        .zip(prev)
        .map(|(n, p)| (n - p) * scale)
        .collect()
}

fn field_of(grid: &Arc<Grid>, data: &[f64]) -> ScalarField {
    ScalarField {
        grid: grid.clone(),
        data: data.to_vec(),
    }
}

/// Compute the spatial gauge fields of one state under one frame.
pub fn enrich(s: f64, u: &MapField, tension: &VectorField, frame: &FrameField) -> GaugeSnapshot {
    let g = u.grid().clone();
    let (d1u1, d2u1) = gradient(&u.u1);
    let (d1u2, d2u2) = gradient(&u.u2);
    let phi1 = frame_components(u, frame, &d1u1.data, &d1u2.data);
    let phi2 = frame_components(u, frame, &d2u1.data, &d2u2.data);
    let phis = frame_components(u, frame, &tension.v1.data, &tension.v2.data);
    let (d1e1_1, d2e1_1) = gradient(&field_of(&g, &frame.e1_1));
    let (d1e1_2, d2e1_2) = gradient(&field_of(&g, &frame.e1_2));
    let (d1e2_1, d2e2_1) = gradient(&field_of(&g, &frame.e2_1));
    let (d1e2_2, d2e2_2) = gradient(&field_of(&g, &frame.e2_2));
    let a1 = connection_scalar(
        u, frame, &d1u1.data, &d1u2.data, &d1e1_1, &d1e1_2, &d1e2_1, &d1e2_2,
    );
    let a2 = connection_scalar(
        u, frame, &d2u1.data, &d2u2.data, &d2e1_1, &d2e1_2, &d2e2_1, &d2e2_2,
    );
    GaugeSnapshot {
        s,
        phi1,
        phi2,
        phis,
        a1,
        a2,
    }
}

/// Limit connection and differential fields of a (discretely) harmonic map
/// in the frame `Ξ = Θ(Q)`.
#[derive(Clone, Debug)]
pub struct LimitConnection {
    /// `a_i^∞ = -e^{-Q²} ∂ᵢQ¹` (the `[·]¹₂` entries).
    pub a1_inf: ScalarField,
    pub a2_inf: ScalarField,
    /// `φ_i^∞ = (e^{-Q²} ∂ᵢQ¹, ∂ᵢQ²)`.
    pub phi1_inf: FramePair,
    pub phi2_inf: FramePair,
    /// Interior sup residual of the divergence identity
    /// `h^{ii}(∂ᵢa_i^∞ - Γ^k_{ii}a_k^∞) = -(e^{2x2}∂₁Q¹∂₁Q² + ∂₂Q¹∂₂Q²)e^{-Q²}`.
    pub div_identity_residual: f64,
    /// Set when `Q` failed the harmonicity tolerance (the fields are still
    /// produced).
    pub tension_warning: bool,
}

/// Closed-form limit connection of `Q` plus the divergence identity audit.
pub fn limit_connection(q: &MapField, tension_tol: f64) -> Result<LimitConnection> {
    q.validate("limit_connection", 0, "s", 0.0)?;
    let g = q.grid().clone();
    let tension_warning = crate::harmonic::tension_sup(q)? > tension_tol;
    let (d1q1, d2q1) = gradient(&q.u1);
    let (d1q2, d2q2) = gradient(&q.u2);
    let mut a1_inf = ScalarField::zeros(&g);
    let mut a2_inf = ScalarField::zeros(&g);
    let mut phi1_inf = FramePair::zeros(&g);
    let mut phi2_inf = FramePair::zeros(&g);
    for k in 0..g.len() {
        let emq = (-q.u2.data[k]).exp();
        a1_inf.data[k] = -emq * d1q1.data[k];
        a2_inf.data[k] = -emq * d2q1.data[k];
        phi1_inf.c1.data[k] = emq * d1q1.data[k];
        phi1_inf.c2.data[k] = d1q2.data[k];
        phi2_inf.c1.data[k] = emq * d2q1.data[k];
        phi2_inf.c2.data[k] = d2q2.data[k];
    }
    // divergence identity, left side by finite differences of a^∞
    let (d1a1, _) = gradient(&a1_inf);
    let (_, d2a2) = gradient(&a2_inf);
    // measured two rings in: the outermost interior ring mixes one-sided
    // first-derivative values and would pollute the 2nd-order signal
    let mut worst = 0.0f64;
    for j in 2..g.n2 - 2 {
        let e2 = g.e2x2[j];
        for i in 2..g.n1 - 2 {
            let k = g.idx(i, j);
            let lhs = e2 * d1a1.data[k] + d2a2.data[k] - a2_inf.data[k];
            let x = e2 * d1q1.data[k] * d1q2.data[k] + d2q1.data[k] * d2q2.data[k];
            let rhs = -x * (-q.u2.data[k]).exp();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(LimitConnection {
        a1_inf,
        a2_inf,
        phi1_inf,
        phi2_inf,
        div_identity_residual: worst,
        tension_warning,
    })
}

/// Gauge data of a family of time slices sharing the grid and the s-ladder.
pub struct GaugeFamily {
    pub grid: Arc<Grid>,
    pub delta_t: f64,
    pub s_values: Vec<f64>,
    pub slice_times: Vec<f64>,
    /// `spatial[slice][s_idx]`.
    pub spatial: Vec<Vec<GaugeSnapshot>>,
    /// `phit[slice][s_idx]`, populated on inner slices.
    pub phit: Vec<Vec<Option<FramePair>>>,
    /// `at[slice][s_idx]`, populated on inner slices.
    pub at: Vec<Vec<Option<ScalarField>>>,
    pub reortho_counts: Vec<usize>,
    pub max_defect: f64,
    pub det_range: (f64, f64),
    pub final_mismatch: f64,
    /// Fitted exponential decay rate of `‖φₛ‖₂(s)` on the center slice.
    pub fitted_decay: f64,
}

impl GaugeFamily {
    pub fn center(&self) -> usize {
        self.slice_times.len() / 2
    }

    pub fn s_index(&self, s: f64) -> Option<usize> {
        self.s_values.iter().position(|&x| (x - s).abs() < 1e-12)
    }

    pub fn snapshot(&self, slice: usize, s_idx: usize) -> &GaugeSnapshot {
        &self.spatial[slice][s_idx]
    }
}

/// Build the caloric gauge over equally spaced time slices.
///
/// Each slice runs its own heat flow + frame transport; the t-differenced
/// fields `φ_t`, `a_t` are produced on inner slices by centered differences
/// over `delta_t`. Snapshots are taken at `cfg.snapshot_s`.
pub fn caloric_family(
    slices: &[(f64, MapField)],
    q: &MapField,
    cfg: &HeatConfig,
) -> Result<GaugeFamily> {
    if slices.len() < 3 {
        return Err(Error::Config(format!(
            "gauge family needs at least 3 time slices, got {}",
            slices.len()
        )));
    }
    let delta_t = slices[1].0 - slices[0].0;
    for w in slices.windows(2) {
        if ((w[1].0 - w[0].0) - delta_t).abs() > 1e-10 {
            return Err(Error::Config("time slices must be equally spaced".into()));
        }
    }
    let grid = q.grid().clone();
    let n_s = cfg.snapshot_s.len();
    let mut runs = Vec::with_capacity(slices.len());
    for (_, u0) in slices {
        runs.push(transport_frames(u0, q, cfg)?);
    }

    let mut spatial: Vec<Vec<GaugeSnapshot>> = Vec::with_capacity(slices.len());
    for run in &runs {
        if run.frames.len() != n_s {
            return Err(Error::Config(format!(
                "slice produced {} snapshots, expected {} (flow stopped early?)",
                run.frames.len(),
                n_s
            )));
        }
        let mut per_s = Vec::with_capacity(n_s);
        for (idx, (s, frame)) in run.frames.iter().enumerate() {
            let snap = &run.heat.snapshots[idx];
            per_s.push(enrich(*s, &snap.u, &snap.tension, frame));
        }
        spatial.push(per_s);
    }

    // t-differenced fields on inner slices
    let n_slices = slices.len();
    let mut phit: Vec<Vec<Option<FramePair>>> = vec![vec![None; n_s]; n_slices];
    let mut at: Vec<Vec<Option<ScalarField>>> = vec![vec![None; n_s]; n_slices];
    let inv2dt = 1.0 / (2.0 * delta_t);
    for sl in 1..n_slices - 1 {
        for s_idx in 0..n_s {
            let u = &runs[sl].heat.snapshots[s_idx].u;
            let frame = &runs[sl].frames[s_idx].1;
            let u_prev = &runs[sl - 1].heat.snapshots[s_idx].u;
            let u_next = &runs[sl + 1].heat.snapshots[s_idx].u;
            let f_prev = &runs[sl - 1].frames[s_idx].1;
            let f_next = &runs[sl + 1].frames[s_idx].1;
            let n = grid.len();
            let mut dtu1 = vec![0.0; n];
            let mut dtu2 = vec![0.0; n];
            for k in 0..n {
                dtu1[k] = (u_next.u1.data[k] - u_prev.u1.data[k]) * inv2dt;
                dtu2[k] = (u_next.u2.data[k] - u_prev.u2.data[k]) * inv2dt;
            }
            phit[sl][s_idx] = Some(frame_components(u, frame, &dtu1, &dtu2));
            // a_t = ½(⟨∇ₜe₂, e₁⟩ - ⟨∇ₜe₁, e₂⟩) with centered t-differences
            let dte1_1 = field_of(&grid, &diff_scaled(&f_next.e1_1, &f_prev.e1_1, inv2dt));
            let dte1_2 = field_of(&grid, &diff_scaled(&f_next.e1_2, &f_prev.e1_2, inv2dt));
            let dte2_1 = field_of(&grid, &diff_scaled(&f_next.e2_1, &f_prev.e2_1, inv2dt));
            let dte2_2 = field_of(&grid, &diff_scaled(&f_next.e2_2, &f_prev.e2_2, inv2dt));
            at[sl][s_idx] = Some(connection_scalar(
                u, frame, &dtu1, &dtu2, &dte1_1, &dte1_2, &dte2_1, &dte2_2,
            ));
        }
    }

    // decay rate of ‖φₛ‖₂ on the center slice diagnostics (tail quadrature)
    let center = n_slices / 2;
    let diag = &runs[center].heat.diagnostics;
    let pts: Vec<(f64, f64)> = diag
        .iter()
        .filter(|d| d.s >= 1.0 && d.l2_dsu > 0.0)
        .map(|d| (d.s, d.l2_dsu))
        .collect();
    let fitted_decay = if pts.len() >= 5 {
        decay_fit(&pts, (pts[0].0, pts[pts.len() - 1].0))
            .map(|f| f.rate)
            .unwrap_or(0.25)
    } else {
        0.25
    };

    Ok(GaugeFamily {
        grid,
        delta_t,
        s_values: cfg.snapshot_s.clone(),
        slice_times: slices.iter().map(|(t, _)| *t).collect(),
        spatial,
        phit,
        at,
        reortho_counts: runs.iter().map(|r| r.reortho_count).collect(),
        max_defect: runs.iter().fold(0.0, |m, r| m.max(r.max_defect)),
        det_range: runs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, r| {
            (acc.0.min(r.det_range.0), acc.1.max(r.det_range.1))
        }),
        final_mismatch: runs.iter().fold(0.0, |m, r| m.max(r.final_mismatch)),
        fitted_decay,
    })
}

/// Residual report of the heat-tension identity
/// `φₛ = h^{ij}(∂ᵢφⱼ + Aᵢφⱼ) - φ₂`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub sup: f64,
    pub l2: f64,
}

/// Compare the frame-paired `φₛ` against the gauge expression of the
/// tension field.
pub fn heat_tension_crosscheck(snap: &GaugeSnapshot, grid: &Arc<Grid>) -> CrosscheckReport {
    let (d1phi1_1, _) = gradient(&snap.phi1.c1);
    let (d1phi1_2, _) = gradient(&snap.phi1.c2);
    let (_, d2phi2_1) = gradient(&snap.phi2.c1);
    let (_, d2phi2_2) = gradient(&snap.phi2.c2);
    let mut r1 = ScalarField::zeros(grid);
    let mut r2 = ScalarField::zeros(grid);
    for j in 2..grid.n2 - 2 {
        let e2 = grid.e2x2[j];
        for i in 2..grid.n1 - 2 {
            let k = grid.idx(i, j);
            // D_i φ_i with (Aφ)¹ = aφ², (Aφ)² = -aφ¹
            let rhs1 = e2 * (d1phi1_1.data[k] + snap.a1.data[k] * snap.phi1.c2.data[k])
                + (d2phi2_1.data[k] + snap.a2.data[k] * snap.phi2.c2.data[k])
                - snap.phi2.c1.data[k];
            let rhs2 = e2 * (d1phi1_2.data[k] - snap.a1.data[k] * snap.phi1.c1.data[k])
                + (d2phi2_2.data[k] - snap.a2.data[k] * snap.phi2.c1.data[k])
                - snap.phi2.c2.data[k];
            r1.data[k] = rhs1 - snap.phis.c1.data[k];
            r2.data[k] = rhs2 - snap.phis.c2.data[k];
        }
    }
    CrosscheckReport {
        sup: crate::grid::sup_norm_margin(&r1, 2).max(crate::grid::sup_norm_margin(&r2, 2)),
        l2: l2_norm(&r1).hypot(l2_norm(&r2)),
    }
}

/// Wave tension field `𝔚 = D_tφ_t - φₛ` at the center slice of a family
/// with at least 5 slices (`∂ₜφ_t` needs `φ_t` on both neighbors).
pub fn wave_tension_field(family: &GaugeFamily, s_idx: usize) -> Result<FramePair> {
    let center = family.center();
    if family.slice_times.len() < 5 {
        return Err(Error::Config(
            "wave tension needs ≥ 5 time slices (φ_t on both neighbors of the center)".into(),
        ));
    }
    let phit_prev = family.phit[center - 1][s_idx]
        .as_ref()
        .ok_or_else(|| Error::Config("missing φ_t on the left neighbor slice".into()))?;
    let phit_next = family.phit[center + 1][s_idx]
        .as_ref()
        .ok_or_else(|| Error::Config("missing φ_t on the right neighbor slice".into()))?;
    let phit = family.phit[center][s_idx].as_ref().unwrap();
    let a_t = family.at[center][s_idx].as_ref().unwrap();
    let phis = &family.spatial[center][s_idx].phis;
    let g = &family.grid;
    let inv2dt = 1.0 / (2.0 * family.delta_t);
    let mut out = FramePair::zeros(g);
    for k in 0..g.len() {
        let dt1 = (phit_next.c1.data[k] - phit_prev.c1.data[k]) * inv2dt;
        let dt2 = (phit_next.c2.data[k] - phit_prev.c2.data[k]) * inv2dt;
        out.c1.data[k] = dt1 + a_t.data[k] * phit.c2.data[k] - phis.c1.data[k];
        out.c2.data[k] = dt2 - a_t.data[k] * phit.c1.data[k] - phis.c2.data[k];
    }
    Ok(out)
}

/// Sup-norm residuals of the gauge identities on a family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `D₁φ₂ - D₂φ₁` interior sup, worst over the ladder.
    pub torsion_12: f64,
    /// `D_tφ₁ - D₁φ_t` and `D_tφ₂ - D₂φ_t` at the center slice.
    pub torsion_t1: f64,
    pub torsion_t2: f64,
    /// `∂₁a₂ - ∂₂a₁ - (φ₂¹φ₁² - φ₁¹φ₂²)` interior sup.
    pub curl_12: f64,
    /// `∂ₜa_i - ∂ᵢa_t - (φ_i¹φ_t² - φ_t¹φ_i²)` interior sup.
    pub curl_t1: f64,
    pub curl_t2: f64,
    /// `sup_s sup_x |a_t(s) - ∫ₛ^{s_max} (φₛ∧φ_t)¹₂ dκ|` on the ladder.
    pub at_formula_residual: f64,
    /// Analytic tail estimate `‖φₛ(s_max)‖_∞ ‖φ_t(s_max)‖_∞ / δ̂`.
    pub at_tail_bound: f64,
    pub fitted_decay: f64,
    /// `sup |a_t(s_max)|` (quantified vanishing of the limit).
    pub at_final_sup: f64,
    pub phit_final_sup: f64,
}

fn dt_of(
    family: &GaugeFamily,
    s_idx: usize,
    pick: impl Fn(&GaugeSnapshot) -> &ScalarField,
) -> ScalarField {
    let center = family.center();
    let prev = pick(&family.spatial[center - 1][s_idx]);
    let next = pick(&family.spatial[center + 1][s_idx]);
    let g = &family.grid;
    let inv2dt = 1.0 / (2.0 * family.delta_t);
    let mut out = ScalarField::zeros(g);
    for k in 0..g.len() {
        out.data[k] = (next.data[k] - prev.data[k]) * inv2dt;
    }
    out
}

/// Audit the torsion-free identity, the curl identity and the `a_t`
/// integral formula over the family's ladder.
pub fn identity_residuals(family: &GaugeFamily) -> Result<IdentityReport> {
    let center = family.center();
    if family.phit[center].iter().any(|p| p.is_none()) {
        return Err(Error::Config("family has no t-differenced fields".into()));
    }
    let g = &family.grid;
    let n_s = family.s_values.len();

    let mut torsion_12 = 0.0f64;
    let mut curl_12 = 0.0f64;
    for snap in &family.spatial[center] {
        let (d1p2_1, _) = gradient(&snap.phi2.c1);
        let (d1p2_2, _) = gradient(&snap.phi2.c2);
        let (_, d2p1_1) = gradient(&snap.phi1.c1);
        let (_, d2p1_2) = gradient(&snap.phi1.c2);
        let (d1a2, _) = gradient(&snap.a2);
        let (_, d2a1) = gradient(&snap.a1);
        for j in 1..g.n2 - 1 {
            for i in 1..g.n1 - 1 {
                let k = g.idx(i, j);
                let t1 = d1p2_1.data[k] + snap.a1.data[k] * snap.phi2.c2.data[k]
                    - d2p1_1.data[k]
                    - snap.a2.data[k] * snap.phi1.c2.data[k];
                let t2 = d1p2_2.data[k] - snap.a1.data[k] * snap.phi2.c1.data[k]
                    - d2p1_2.data[k]
                    + snap.a2.data[k] * snap.phi1.c1.data[k];
                torsion_12 = torsion_12.max(t1.abs()).max(t2.abs());
                let wedge = snap.phi2.c1.data[k] * snap.phi1.c2.data[k]
                    - snap.phi1.c1.data[k] * snap.phi2.c2.data[k];
                curl_12 = curl_12.max((d1a2.data[k] - d2a1.data[k] - wedge).abs());
            }
        }
    }

    // time-direction identities at the center slice, worst over the ladder
    let mut torsion_t1 = 0.0f64;
    let mut torsion_t2 = 0.0f64;
    let mut curl_t1 = 0.0f64;
    let mut curl_t2 = 0.0f64;
    for s_idx in 0..n_s {
        let snap = &family.spatial[center][s_idx];
        let phit = family.phit[center][s_idx].as_ref().unwrap();
        let a_t = family.at[center][s_idx].as_ref().unwrap();
        let dt_phi1_1 = dt_of(family, s_idx, |s| &s.phi1.c1);
        let dt_phi1_2 = dt_of(family, s_idx, |s| &s.phi1.c2);
        let dt_phi2_1 = dt_of(family, s_idx, |s| &s.phi2.c1);
        let dt_phi2_2 = dt_of(family, s_idx, |s| &s.phi2.c2);
        let dt_a1 = dt_of(family, s_idx, |s| &s.a1);
        let dt_a2 = dt_of(family, s_idx, |s| &s.a2);
        let (d1pt_1, d2pt_1) = gradient(&phit.c1);
        let (d1pt_2, d2pt_2) = gradient(&phit.c2);
        let (d1at, d2at) = gradient(a_t);
        for j in 1..g.n2 - 1 {
            for i in 1..g.n1 - 1 {
                let k = g.idx(i, j);
                // D_tφ_i - D_iφ_t
                let r1a = dt_phi1_1.data[k] + a_t.data[k] * snap.phi1.c2.data[k]
                    - d1pt_1.data[k]
                    - snap.a1.data[k] * phit.c2.data[k];
                let r1b = dt_phi1_2.data[k] - a_t.data[k] * snap.phi1.c1.data[k]
                    - d1pt_2.data[k]
                    + snap.a1.data[k] * phit.c1.data[k];
                torsion_t1 = torsion_t1.max(r1a.abs()).max(r1b.abs());
                let r2a = dt_phi2_1.data[k] + a_t.data[k] * snap.phi2.c2.data[k]
                    - d2pt_1.data[k]
                    - snap.a2.data[k] * phit.c2.data[k];
                let r2b = dt_phi2_2.data[k] - a_t.data[k] * snap.phi2.c1.data[k]
                    - d2pt_2.data[k]
                    + snap.a2.data[k] * phit.c1.data[k];
                torsion_t2 = torsion_t2.max(r2a.abs()).max(r2b.abs());
                // ∂ₜa_i - ∂ᵢa_t = (φ_i∧φ_t ... )¹₂ = φ_i¹φ_t² - φ_t¹φ_i²
                let w1 = snap.phi1.c1.data[k] * phit.c2.data[k]
                    - phit.c1.data[k] * snap.phi1.c2.data[k];
                curl_t1 = curl_t1.max((dt_a1.data[k] - d1at.data[k] - w1).abs());
                let w2 = snap.phi2.c1.data[k] * phit.c2.data[k]
                    - phit.c1.data[k] * snap.phi2.c2.data[k];
                curl_t2 = curl_t2.max((dt_a2.data[k] - d2at.data[k] - w2).abs());
            }
        }
    }

    // a_t(s) = ∫_s^∞ (φₛ∧φ_t)¹₂ dκ: trapezoid on the ladder + analytic tail
    let wedge_at = |s_idx: usize| -> ScalarField {
        let snap = &family.spatial[center][s_idx];
        let phit = family.phit[center][s_idx].as_ref().unwrap();
        let mut w = ScalarField::zeros(g);
        for k in 0..g.len() {
            // (φₛ∧φ_t)¹₂ = φ_t¹φₛ² - φₛ¹φ_t²
            w.data[k] = phit.c1.data[k] * snap.phis.c2.data[k]
                - snap.phis.c1.data[k] * phit.c2.data[k];
        }
        w
    };
    let wedges: Vec<ScalarField> = (0..n_s).map(wedge_at).collect();
    let mut at_formula_residual = 0.0f64;
    for s_idx in 0..n_s {
        let mut quad = ScalarField::zeros(g);
        for seg in s_idx..n_s - 1 {
            let h = family.s_values[seg + 1] - family.s_values[seg];
            for k in 0..g.len() {
                quad.data[k] += 0.5 * h * (wedges[seg].data[k] + wedges[seg + 1].data[k]);
            }
        }
        let a_t = family.at[center][s_idx].as_ref().unwrap();
        let mut worst = 0.0f64;
        for j in 1..g.n2 - 1 {
            for i in 1..g.n1 - 1 {
                let k = g.idx(i, j);
                worst = worst.max((a_t.data[k] - quad.data[k]).abs());
            }
        }
        at_formula_residual = at_formula_residual.max(worst);
    }
    let last = n_s - 1;
    let phis_final_sup = family.spatial[center][last].phis.sup_interior();
    let phit_final_sup = family.phit[center][last].as_ref().unwrap().sup_interior();
    let at_final_sup = sup_norm_interior(family.at[center][last].as_ref().unwrap());
    let at_tail_bound = phis_final_sup * phit_final_sup / family.fitted_decay.max(1e-6);

    Ok(IdentityReport {
        torsion_12,
        torsion_t1,
        torsion_t2,
        curl_12,
        curl_t1,
        curl_t2,
        at_formula_residual,
        at_tail_bound,
        fitted_decay: family.fitted_decay,
        at_final_sup,
        phit_final_sup,
    })
}
