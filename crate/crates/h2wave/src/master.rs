//! Termwise audit of the master wave equation for the heat tension field.
//!
//! On caloric-gauge data the field `φₛ` satisfies
//!
//! ```text
//! (∂ₜ² - Δ)φₛ + Wφₛ =
//!     -2A_t∂ₜφₛ - A_tA_tφₛ - (∂ₜA_t)φₛ + ∂ₛ𝔚 + (φ_t∧φₛ)φ_t
//!   + 2h^{ii}A_i^con∂ᵢφₛ + h^{ii}A_i^conA_i^∞φₛ + h^{ii}A_i^∞A_i^conφₛ
//!   + h^{ii}A_i^conA_i^conφₛ + h^{ii}(∂ᵢA_i^con - Γ^k_{ii}A_k^con)φₛ
//!   + h^{ii}(φₛ∧φ_i^∞)φ_i^con + h^{ii}(φₛ∧φ_i^con)φ_i^∞
//!   + h^{ii}(φₛ∧φ_i^con)φ_i^con
//! ```
//!
//! with the magnetic operator
//! `Wφ = -2h^{ii}A_i^∞∂ᵢφ - h^{ii}A_i^∞A_i^∞φ - h^{ii}(φ∧φ_i^∞)φ_i^∞
//!  - h^{ii}(∂ᵢA_i^∞ - Γ^k_{ii}A_k^∞)φ` and the splits
//! `A = A^∞ + A^con`, `φ = φ^∞ + φ^con`. Every displayed term is evaluated
//! on its own so the balance (and any ablation) is visible per term.

use serde::{Deserialize, Serialize};

use crate::gauge::{wave_tension_field, FramePair, GaugeFamily, GaugeSnapshot, LimitConnection};
use crate::grid::{gradient, l2_norm, laplace_beltrami, Grid, ScalarField};
use crate::{Error, Result};

/// One term of the balance: name and interior L²(dvol) magnitude.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermRow {
    pub name: String,
    pub l2: f64,
}

/// Master-equation balance report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MasterReport {
    pub s: f64,
    /// L² of `LHS - RHS` (interior, 2-ring margin).
    pub residual_l2: f64,
    /// L² of the residual with the `Wφₛ` term dropped from the left side.
    pub residual_without_w_l2: f64,
    /// Largest single-term L².
    pub max_term_l2: f64,
    pub terms: Vec<TermRow>,
}

/// Pairwise field algebra on frame pairs (plain Euclidean components).
fn zero(grid: &std::sync::Arc<Grid>) -> FramePair {
    FramePair::zeros(grid)
}

fn axpy(dst: &mut FramePair, scale: f64, src: &FramePair) {
    for k in 0..dst.c1.data.len() {
        dst.c1.data[k] += scale * src.c1.data[k];
        dst.c2.data[k] += scale * src.c2.data[k];
    }
}

/// `(a∧b)c = ⟨a,c⟩b - ⟨b,c⟩a` pointwise on frame components.
fn wedge_apply(a: &FramePair, b: &FramePair, c: &FramePair) -> FramePair {
    let g = a.c1.grid.clone();
    let mut out = zero(&g);
    for k in 0..g.len() {
        let ac = a.c1.data[k] * c.c1.data[k] + a.c2.data[k] * c.c2.data[k];
        let bc = b.c1.data[k] * c.c1.data[k] + b.c2.data[k] * c.c2.data[k];
        out.c1.data[k] = ac * b.c1.data[k] - bc * a.c1.data[k];
        out.c2.data[k] = ac * b.c2.data[k] - bc * a.c2.data[k];
    }
    out
}

/// Skew matrix with `[·]¹₂ = a` applied to a pair: `(aφ², -aφ¹)`.
fn skew_apply(a: &ScalarField, phi: &FramePair) -> FramePair {
    let g = a.grid.clone();
    let mut out = zero(&g);
    for k in 0..g.len() {
        out.c1.data[k] = a.data[k] * phi.c2.data[k];
        out.c2.data[k] = -a.data[k] * phi.c1.data[k];
    }
    out
}

/// Interior L²(dvol) with a 2-ring margin (stacked stencils are represented
/// honestly only away from the one-sided boundary ring).
fn margin_l2(p: &FramePair) -> f64 {
    let g = p.c1.grid.clone();
    let mut c1 = ScalarField::zeros(&g);
    let mut c2 = ScalarField::zeros(&g);
    for j in 2..g.n2 - 2 {
        for i in 2..g.n1 - 2 {
            let k = g.idx(i, j);
            c1.data[k] = p.c1.data[k];
            c2.data[k] = p.c2.data[k];
        }
    }
    l2_norm(&c1).hypot(l2_norm(&c2))
}

fn dt_pair(prev: &FramePair, next: &FramePair, inv2dt: f64) -> FramePair {
    let g = prev.c1.grid.clone();
    let mut out = zero(&g);
    for k in 0..g.len() {
        out.c1.data[k] = (next.c1.data[k] - prev.c1.data[k]) * inv2dt;
        out.c2.data[k] = (next.c2.data[k] - prev.c2.data[k]) * inv2dt;
    }
    out
}

fn dtt_pair(prev: &FramePair, mid: &FramePair, next: &FramePair, inv_dtsq: f64) -> FramePair {
    let g = prev.c1.grid.clone();
    let mut out = zero(&g);
    for k in 0..g.len() {
        out.c1.data[k] =
            (next.c1.data[k] - 2.0 * mid.c1.data[k] + prev.c1.data[k]) * inv_dtsq;
        out.c2.data[k] =
            (next.c2.data[k] - 2.0 * mid.c2.data[k] + prev.c2.data[k]) * inv_dtsq;
    }
    out
}

/// `h^{ii}`-weighted accumulation: `dst += sign·e^{2x2}·f₁ + sign·f₂` rows.
fn add_hii(dst: &mut FramePair, x1_part: &FramePair, x2_part: &FramePair, sign: f64) {
    let g = dst.c1.grid.clone();
    for j in 0..g.n2 {
        let e2 = g.e2x2[j];
        for i in 0..g.n1 {
            let k = g.idx(i, j);
            dst.c1.data[k] += sign * (e2 * x1_part.c1.data[k] + x2_part.c1.data[k]);
            dst.c2.data[k] += sign * (e2 * x1_part.c2.data[k] + x2_part.c2.data[k]);
        }
    }
}

/// Divergence scalar `e^{2x2}∂₁a₁ + ∂₂a₂ - a₂` of a connection pair.
fn divergence_scalar(a1: &ScalarField, a2: &ScalarField) -> ScalarField {
    let g = a1.grid.clone();
    let (d1a1, _) = gradient(a1);
    let (_, d2a2) = gradient(a2);
    let mut out = ScalarField::zeros(&g);
    for j in 0..g.n2 {
        let e2 = g.e2x2[j];
        for i in 0..g.n1 {
            let k = g.idx(i, j);
            out.data[k] = e2 * d1a1.data[k] + d2a2.data[k] - a2.data[k];
        }
    }
    out
}

fn pair_sub(a: &FramePair, b: &FramePair) -> FramePair {
    let g = a.c1.grid.clone();
    let mut out = zero(&g);
    for k in 0..g.len() {
        out.c1.data[k] = a.c1.data[k] - b.c1.data[k];
        out.c2.data[k] = a.c2.data[k] - b.c2.data[k];
    }
    out
}

fn scalar_sub(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let g = a.grid.clone();
    let mut out = ScalarField::zeros(&g);
    for k in 0..g.len() {
        out.data[k] = a.data[k] - b.data[k];
    }
    out
}

fn grad_pair(p: &FramePair) -> (FramePair, FramePair) {
    let (d1c1, d2c1) = gradient(&p.c1);
    let (d1c2, d2c2) = gradient(&p.c2);
    (
        FramePair { c1: d1c1, c2: d1c2 },
        FramePair { c1: d2c1, c2: d2c2 },
    )
}

/// Evaluate every displayed term of the master equation at heat time
/// `s_center` on a 5-slice family and report the balance.
///
/// Needs `s_center` to sit between two equally spaced ladder neighbors (for
/// `∂ₛ𝔚`) and 5 time slices (for `∂ₜA_t` and `∂ₛ𝔚`'s own t-differences).
pub fn master_equation_residual(
    family: &GaugeFamily,
    s_center: f64,
    limit: &LimitConnection,
) -> Result<MasterReport> {
    let mut missing: Vec<&str> = Vec::new();
    if family.slice_times.len() < 5 {
        missing.push("5 time slices");
    }
    let s_idx = match family.s_index(s_center) {
        Some(i) if i > 0 && i + 1 < family.s_values.len() => i,
        _ => {
            missing.push("s_center with both ladder neighbors");
            0
        }
    };
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "master equation stencil incomplete: missing {}",
            missing.join(", ")
        )));
    }
    let h_lo = family.s_values[s_idx] - family.s_values[s_idx - 1];
    let h_hi = family.s_values[s_idx + 1] - family.s_values[s_idx];
    if (h_lo - h_hi).abs() > 1e-12 {
        return Err(Error::Config(
            "master equation needs equally spaced s-neighbors around s_center".into(),
        ));
    }

    let center = family.center();
    let g = &family.grid;
    let inv2dt = 1.0 / (2.0 * family.delta_t);
    let inv_dtsq = 1.0 / (family.delta_t * family.delta_t);

    let snap: &GaugeSnapshot = family.snapshot(center, s_idx);
    let snap_prev = family.snapshot(center - 1, s_idx);
    let snap_next = family.snapshot(center + 1, s_idx);
    let phis = &snap.phis;
    let phit = family.phit[center][s_idx].as_ref().unwrap();
    let a_t = family.at[center][s_idx].as_ref().unwrap();

    let mut terms: Vec<TermRow> = Vec::new();
    let push = |terms: &mut Vec<TermRow>, name: &str, p: &FramePair| -> f64 {
        let l2 = margin_l2(p);
        terms.push(TermRow {
            name: name.to_string(),
            l2,
        });
        l2
    };

    // ---- left side ----
    let dtt = dtt_pair(&snap_prev.phis, phis, &snap_next.phis, inv_dtsq);
    push(&mut terms, "dtt_phis", &dtt);

    let lap = FramePair {
        c1: laplace_beltrami(&phis.c1),
        c2: laplace_beltrami(&phis.c2),
    };
    push(&mut terms, "lap_phis", &lap);

    // W pieces
    let (d1_phis, d2_phis) = grad_pair(phis);
    let w_first = {
        // -2 h^{ii} A_i^∞ ∂ᵢφₛ
        let x1 = skew_apply(&limit.a1_inf, &d1_phis);
        let x2 = skew_apply(&limit.a2_inf, &d2_phis);
        let mut t = zero(g);
        add_hii(&mut t, &x1, &x2, -2.0);
        t
    };
    push(&mut terms, "w_first_order", &w_first);

    let w_asq = {
        // -h^{ii} A_i^∞A_i^∞ φₛ = +h^{ii} (a_i^∞)² φₛ
        let g2 = g.clone();
        let mut t = zero(&g2);
        for j in 0..g2.n2 {
            let e2 = g2.e2x2[j];
            for i in 0..g2.n1 {
                let k = g2.idx(i, j);
                let w = e2 * limit.a1_inf.data[k] * limit.a1_inf.data[k]
                    + limit.a2_inf.data[k] * limit.a2_inf.data[k];
                t.c1.data[k] = w * phis.c1.data[k];
                t.c2.data[k] = w * phis.c2.data[k];
            }
        }
        t
    };
    push(&mut terms, "w_connection_sq", &w_asq);

    let w_curv = {
        // -h^{ii} (φₛ∧φ_i^∞)φ_i^∞
        let x1 = wedge_apply(phis, &limit.phi1_inf, &limit.phi1_inf);
        let x2 = wedge_apply(phis, &limit.phi2_inf, &limit.phi2_inf);
        let mut t = zero(g);
        add_hii(&mut t, &x1, &x2, -1.0);
        t
    };
    push(&mut terms, "w_curvature", &w_curv);

    let w_div = {
        // -h^{ii}(∂ᵢA_i^∞ - Γ^k_{ii}A_k^∞) φₛ
        let div = divergence_scalar(&limit.a1_inf, &limit.a2_inf);
        let mut t = skew_apply(&div, phis);
        for k in 0..g.len() {
            t.c1.data[k] = -t.c1.data[k];
            t.c2.data[k] = -t.c2.data[k];
        }
        t
    };
    push(&mut terms, "w_divergence", &w_div);

    // ---- right side ----
    let dt_phis = dt_pair(&snap_prev.phis, &snap_next.phis, inv2dt);
    let r_at_dt = {
        let mut t = skew_apply(a_t, &dt_phis);
        for k in 0..g.len() {
            t.c1.data[k] *= -2.0;
            t.c2.data[k] *= -2.0;
        }
        t
    };
    push(&mut terms, "minus_2at_dt_phis", &r_at_dt);

    let r_at_sq = {
        // -A_tA_t φₛ = +a_t² φₛ
        let g2 = g.clone();
        let mut t = zero(&g2);
        for k in 0..g2.len() {
            let w = a_t.data[k] * a_t.data[k];
            t.c1.data[k] = w * phis.c1.data[k];
            t.c2.data[k] = w * phis.c2.data[k];
        }
        t
    };
    push(&mut terms, "minus_at_at_phis", &r_at_sq);

    let r_dat = {
        // -(∂ₜA_t)φₛ
        let at_prev = family.at[center - 1][s_idx]
            .as_ref()
            .ok_or_else(|| Error::Config("missing a_t on the left neighbor slice".into()))?;
        let at_next = family.at[center + 1][s_idx]
            .as_ref()
            .ok_or_else(|| Error::Config("missing a_t on the right neighbor slice".into()))?;
        let mut dat = ScalarField::zeros(g);
        for k in 0..g.len() {
            dat.data[k] = (at_next.data[k] - at_prev.data[k]) * inv2dt;
        }
        let mut t = skew_apply(&dat, phis);
        for k in 0..g.len() {
            t.c1.data[k] = -t.c1.data[k];
            t.c2.data[k] = -t.c2.data[k];
        }
        t
    };
    push(&mut terms, "minus_dt_at_phis", &r_dat);

    let r_dsw = {
        // ∂ₛ𝔚 by centered s-difference of the wave tension field
        let w_lo = wave_tension_field(family, s_idx - 1)?;
        let w_hi = wave_tension_field(family, s_idx + 1)?;
        dt_pair(&w_lo, &w_hi, 1.0 / (h_lo + h_hi))
    };
    push(&mut terms, "ds_wave_tension", &r_dsw);

    let r_curv_t = wedge_apply(phit, phis, phit);
    push(&mut terms, "curvature_t", &r_curv_t);

    // con splits
    let a1_con = scalar_sub(&snap.a1, &limit.a1_inf);
    let a2_con = scalar_sub(&snap.a2, &limit.a2_inf);
    let phi1_con = pair_sub(&snap.phi1, &limit.phi1_inf);
    let phi2_con = pair_sub(&snap.phi2, &limit.phi2_inf);

    let r_acon_first = {
        // 2 h^{ii} A_i^con ∂ᵢφₛ
        let x1 = skew_apply(&a1_con, &d1_phis);
        let x2 = skew_apply(&a2_con, &d2_phis);
        let mut t = zero(g);
        add_hii(&mut t, &x1, &x2, 2.0);
        t
    };
    push(&mut terms, "acon_first_order", &r_acon_first);

    // A^con A^∞ and A^∞ A^con and A^con A^con: products of so(2) scalars
    let so2_product = |a: &ScalarField, b: &ScalarField| -> FramePair {
        // A_a A_b φ = -a·b φ for the skew matrices
        let g2 = a.grid.clone();
        let mut t = zero(&g2);
        for j in 0..g2.n2 {
            let e2 = g2.e2x2[j];
            let _ = e2;
            for i in 0..g2.n1 {
                let k = g2.idx(i, j);
                t.c1.data[k] = -a.data[k] * b.data[k] * phis.c1.data[k];
                t.c2.data[k] = -a.data[k] * b.data[k] * phis.c2.data[k];
            }
        }
        t
    };
    let hii_sum = |x1: FramePair, x2: FramePair| -> FramePair {
        let mut t = zero(g);
        add_hii(&mut t, &x1, &x2, 1.0);
        t
    };
    let r_acon_ainf = hii_sum(
        so2_product(&a1_con, &limit.a1_inf),
        so2_product(&a2_con, &limit.a2_inf),
    );
    push(&mut terms, "acon_ainf_phis", &r_acon_ainf);
    let r_ainf_acon = hii_sum(
        so2_product(&limit.a1_inf, &a1_con),
        so2_product(&limit.a2_inf, &a2_con),
    );
    push(&mut terms, "ainf_acon_phis", &r_ainf_acon);
    let r_acon_acon = hii_sum(
        so2_product(&a1_con, &a1_con),
        so2_product(&a2_con, &a2_con),
    );
    push(&mut terms, "acon_acon_phis", &r_acon_acon);

    let r_div_con = {
        let div = divergence_scalar(&a1_con, &a2_con);
        skew_apply(&div, phis)
    };
    push(&mut terms, "divergence_con", &r_div_con);

    let r_mix1 = hii_sum(
        wedge_apply(phis, &limit.phi1_inf, &phi1_con),
        wedge_apply(phis, &limit.phi2_inf, &phi2_con),
    );
    push(&mut terms, "curv_inf_con", &r_mix1);
    let r_mix2 = hii_sum(
        wedge_apply(phis, &phi1_con, &limit.phi1_inf),
        wedge_apply(phis, &phi2_con, &limit.phi2_inf),
    );
    push(&mut terms, "curv_con_inf", &r_mix2);
    let r_con_con = hii_sum(
        wedge_apply(phis, &phi1_con, &phi1_con),
        wedge_apply(phis, &phi2_con, &phi2_con),
    );
    push(&mut terms, "curv_con_con", &r_con_con);

    // ---- balance ----
    let mut lhs = zero(g);
    axpy(&mut lhs, 1.0, &dtt);
    axpy(&mut lhs, -1.0, &lap);
    let mut w_total = zero(g);
    axpy(&mut w_total, 1.0, &w_first);
    axpy(&mut w_total, 1.0, &w_asq);
    axpy(&mut w_total, 1.0, &w_curv);
    axpy(&mut w_total, 1.0, &w_div);

    let mut rhs = zero(g);
    for part in [
        &r_at_dt,
        &r_at_sq,
        &r_dat,
        &r_dsw,
        &r_curv_t,
        &r_acon_first,
        &r_acon_ainf,
        &r_ainf_acon,
        &r_acon_acon,
        &r_div_con,
        &r_mix1,
        &r_mix2,
        &r_con_con,
    ] {
        axpy(&mut rhs, 1.0, part);
    }

    let mut residual = zero(g);
    axpy(&mut residual, 1.0, &lhs);
    axpy(&mut residual, 1.0, &w_total);
    axpy(&mut residual, -1.0, &rhs);
    let residual_l2 = margin_l2(&residual);

    let mut residual_no_w = zero(g);
    axpy(&mut residual_no_w, 1.0, &lhs);
    axpy(&mut residual_no_w, -1.0, &rhs);
    let residual_without_w_l2 = margin_l2(&residual_no_w);

    let max_term_l2 = terms.iter().fold(0.0f64, |m, t| m.max(t.l2));

    Ok(MasterReport {
        s: s_center,
        residual_l2,
        residual_without_w_l2,
        max_term_l2,
        terms,
    })
}

/// Scale a frame pair (used by the static-data test below and by callers
/// assembling ablations).
pub fn pair_scale(p: &FramePair, s: f64) -> FramePair {
    let g = p.c1.grid.clone();
    let mut out = FramePair::zeros(&g);
    for k in 0..g.len() {
        out.c1.data[k] = s * p.c1.data[k];
        out.c2.data[k] = s * p.c2.data[k];
    }
    out
}
