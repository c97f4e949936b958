//! Wave maps in coordinates with a kick-drift-kick leapfrog integrator.
//!
//! The evolution is `∂ₜₜu^k = Δu^k - Γ̄^k_{ij}(∂ₜu^i ∂ₜu^j - h^{ab}∂ₐu^i ∂ᵦu^j)`,
//! i.e. acceleration = spatial tension - Γ̄(∂ₜu, ∂ₜu). The velocity-dependent
//! Christoffel term is evaluated with the half-step velocity inside each
//! kick, with one Picard correction in the first kick; that keeps the step
//! explicit, 2nd-order and time-symmetric up to O(dt³) local error. The
//! boundary layer stays frozen at the reference map and carries zero
//! velocity. The CFL bound uses the coordinate wave speed `e^{x2}` in the
//! x1 direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{
    distance_field, integrate_volume, l2_norm, sup_norm, Grid, MapField, ScalarField, VectorField,
};
use crate::harmonic::energy_density;
use crate::heat::add_bump;
use crate::{Error, Result};

/// Position and velocity of the wave map at one time.
#[derive(Clone, Debug)]
pub struct WaveState {
    pub u: MapField,
    /// `∂ₜu¹` in the coordinate basis.
    pub v1: ScalarField,
    /// `∂ₜu²` in the coordinate basis.
    pub v2: ScalarField,
    pub t: f64,
}

impl WaveState {
    pub fn resting(u: MapField) -> Self {
        let g = u.grid().clone();
        Self {
            u,
            v1: ScalarField::zeros(&g),
            v2: ScalarField::zeros(&g),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> std::sync::Arc<Grid> {
        self.u.grid().clone()
    }

    /// Flip the sign of the velocity (for time-reversal experiments).
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        for x in &mut out.v1.data {
            *x = -*x;
        }
        for x in &mut out.v2.data {
            *x = -*x;
        }
        out
    }

    pub fn validate(&self, step: usize) -> Result<()> {
        self.u.validate("wave_map", step, "t", self.t)?;
        self.v1.validate("wave_map", step, "t", self.t)?;
        self.v2.validate("wave_map", step, "t", self.t)
    }
}

/// Gaussian perturbation added to one component of the initial map.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BumpSpec {
    /// Center in Iwasawa coordinates.
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
    /// Perturbed component, 1 or 2.
    pub component: u8,
}

impl BumpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::Config(format!(
                "bump width must be positive, got {}",
                self.width
            )));
        }
        if self.component != 1 && self.component != 2 {
            return Err(Error::Config(format!(
                "bump component must be 1 or 2, got {}",
                self.component
            )));
        }
        if !self.amplitude.is_finite() || !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::Config("non-finite bump parameters".into()));
        }
        Ok(())
    }
}

/// Integration parameters for one wave-map run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveConfig {
    pub t_max: f64,
    /// Courant fraction in `(0, 1)`.
    pub cfl: f64,
    /// Times at which full states are emitted (snapped to step multiples).
    pub sample_times: Vec<f64>,
    pub bump: BumpSpec,
    /// Record energy/distance rows every this many steps (≥ 1).
    #[serde(default = "default_energy_every")]
    pub energy_every: usize,
}

fn default_energy_every() -> usize {
    1
}

impl WaveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) {
            return Err(Error::Config(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0,1), got {}", self.cfl)));
        }
        if self.energy_every == 0 {
            return Err(Error::Config("energy_every must be at least 1".into()));
        }
        self.bump.validate()
    }
}

/// Largest stable step: `min(dx1·e^{-x2_max}, dx2)`; the coordinate wave
/// speed in x1 grows like `e^{x2}` toward the top of the grid.
pub fn cfl_limit(grid: &Grid) -> f64 {
    (grid.dx1 * (-grid.x2_max).exp()).min(grid.dx2)
}

/// Step size and count a run of `cfg` will use (the CFL-limited step is
/// shrunk so `t_max` lands exactly). Sample times that must be exact step
/// multiples can be built from this.
pub fn step_layout(grid: &Grid, cfg: &WaveConfig) -> (f64, usize) {
    let dt_raw = cfg.cfl * cfl_limit(grid);
    let steps = (cfg.t_max / dt_raw).ceil() as usize;
    (cfg.t_max / steps as f64, steps)
}

/// Build the perturbed initial state `(Q + bump, 0)`.
///
/// The 3-width support box must sit strictly inside the grid with a margin
/// of at least 3 cells; the hyperbolic distance from the support to the
/// boundary (the clean-window horizon for the unit wave speed) is returned
/// alongside the state.
pub fn perturb(q: &MapField, bump: &BumpSpec) -> Result<(WaveState, f64)> {
    bump.validate()?;
    let g = q.grid().clone();
    let support = 3.0 * bump.width;
    let margin_x1 = (g.x1_max - bump.center[0].abs()) - support;
    let margin_x2 = (g.x2_max - bump.center[1].abs()) - support;
    let needed = 3.0 * g.dx1.max(g.dx2);
    if margin_x1 < needed || margin_x2 < needed {
        return Err(Error::Config(format!(
            "bump support too close to the boundary: margins ({margin_x1:.3}, {margin_x2:.3}), need {needed:.3}"
        )));
    }
    let u = add_bump(
        q,
        (bump.center[0], bump.center[1]),
        bump.width,
        bump.amplitude,
        bump.component,
    );
    let horizon = clean_window(&g, bump);
    Ok((WaveState::resting(u), horizon))
}

/// Hyperbolic distance from the bump's coordinate support box to the grid
/// boundary (the horizon before boundary effects can reach the support at
/// unit wave speed).
fn clean_window(g: &Grid, bump: &BumpSpec) -> f64 {
    use crate::geometry::{hyp_distance, DomainPoint};
    let support = 3.0 * bump.width;
    let clamp = |x: f64, lo: f64, hi: f64| x.max(lo).min(hi);
    let mut best = f64::INFINITY;
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            if !g.is_boundary(i, j) {
                continue;
            }
            let p = g.point(i, j);
            let sx = clamp(p.x1, bump.center[0] - support, bump.center[0] + support);
            let sy = clamp(p.x2, bump.center[1] - support, bump.center[1] + support);
            best = best.min(hyp_distance(p, DomainPoint::new(sx, sy)));
        }
    }
    best
}

/// Spatial tension and `e^{-2u²}` in one pass (row-parallel, node-wise
/// writes only, so the thread count cannot change any value).
fn spatial_tension(u: &MapField, out: &mut VectorField, exps: &mut [f64]) {
    let g = u.grid().clone();
    let n1 = g.n1;
    let inv_dx1sq = 1.0 / (g.dx1 * g.dx1);
    // conservative x2 stencil shared with the heat integrator, so relaxed
    // maps are exact equilibria of both flows
    let (lo, up) = crate::heat::a2_coefficients(g.dx2);
    let inv2dx1 = 1.0 / (2.0 * g.dx1);
    let inv2dx2 = 1.0 / (2.0 * g.dx2);
    let u1 = &u.u1.data;
    let u2 = &u.u2.data;
    let (o1, o2) = (&mut out.v1.data, &mut out.v2.data);
    o1.par_chunks_mut(n1)
        .zip(o2.par_chunks_mut(n1))
        .zip(exps.par_chunks_mut(n1))
        .enumerate()
        .with_min_len(8)
        .for_each(|(j, ((row1, row2), erow))| {
            let base = j * n1;
            for i in 0..n1 {
                erow[i] = (-2.0 * u2[base + i]).exp();
            }
            if j == 0 || j == g.n2 - 1 {
                row1.fill(0.0);
                row2.fill(0.0);
                return;
            }
            let e2 = g.e2x2[j];
            row1[0] = 0.0;
            row2[0] = 0.0;
            row1[n1 - 1] = 0.0;
            row2[n1 - 1] = 0.0;
            for i in 1..n1 - 1 {
                let k = base + i;
                let lap1 = e2 * (u1[k + 1] - 2.0 * u1[k] + u1[k - 1]) * inv_dx1sq
                    + up * (u1[k + n1] - u1[k])
                    + lo * (u1[k - n1] - u1[k]);
                let lap2 = e2 * (u2[k + 1] - 2.0 * u2[k] + u2[k - 1]) * inv_dx1sq
                    + up * (u2[k + n1] - u2[k])
                    + lo * (u2[k - n1] - u2[k]);
                let d1u1 = (u1[k + 1] - u1[k - 1]) * inv2dx1;
                let d2u1 = (u1[k + n1] - u1[k - n1]) * inv2dx2;
                let d1u2 = (u2[k + 1] - u2[k - 1]) * inv2dx1;
                let d2u2 = (u2[k + n1] - u2[k - n1]) * inv2dx2;
                row1[i] = lap1 - 2.0 * (e2 * d1u1 * d1u2 + d2u1 * d2u2);
                row2[i] = lap2 + erow[i] * (e2 * d1u1 * d1u1 + d2u1 * d2u1);
            }
        });
}

/// Leapfrog stepper with cached spatial tension.
pub struct WaveStepper {
    anchor: MapField,
    spatial: VectorField,
    exp_m2u2: Vec<f64>,
    vh1: Vec<f64>,
    vh2: Vec<f64>,
    pub dt: f64,
    pub state: WaveState,
    steps_taken: usize,
}

impl WaveStepper {
    pub fn new(state: WaveState, anchor: MapField, dt: f64) -> Result<Self> {
        let g = state.grid();
        if !anchor.grid().same_layout(&g) {
            return Err(Error::Config("anchor grid does not match state grid".into()));
        }
        let limit = cfl_limit(&g);
        if dt > limit {
            return Err(Error::Config(format!(
                "CFL violation: dt = {dt:.3e} exceeds the stable limit {limit:.3e}"
            )));
        }
        state.validate(0)?;
        let mut spatial = VectorField::zeros(&g);
        let mut exps = vec![0.0; g.len()];
        spatial_tension(&state.u, &mut spatial, &mut exps);
        Ok(Self {
            anchor,
            spatial,
            exp_m2u2: exps,
            vh1: vec![0.0; g.len()],
            vh2: vec![0.0; g.len()],
            dt,
            state,
            steps_taken: 0,
        })
    }

    pub fn anchor(&self) -> &MapField {
        &self.anchor
    }

    /// One kick-drift-kick step.
    pub fn step(&mut self) -> Result<()> {
        let g = self.state.grid();
        let n1 = g.n1;
        let half = 0.5 * self.dt;
        {
            let u1 = &mut self.state.u.u1.data;
            let u2 = &mut self.state.u.u2.data;
            let v1 = &self.state.v1.data;
            let v2 = &self.state.v2.data;
            let sp1 = &self.spatial.v1.data;
            let sp2 = &self.spatial.v2.data;
            let exps = &self.exp_m2u2;
            let (vh1, vh2) = (&mut self.vh1, &mut self.vh2);

            // kick 1 with one Picard correction on the Γ̄(v,v) term, then drift
            for j in 1..g.n2 - 1 {
                for i in 1..n1 - 1 {
                    let k = j * n1 + i;
                    let a1 = sp1[k] + 2.0 * v1[k] * v2[k];
                    let a2 = sp2[k] - exps[k] * v1[k] * v1[k];
                    let p1 = v1[k] + half * a1;
                    let p2 = v2[k] + half * a2;
                    let a1 = sp1[k] + 2.0 * p1 * p2;
                    let a2 = sp2[k] - exps[k] * p1 * p1;
                    vh1[k] = v1[k] + half * a1;
                    vh2[k] = v2[k] + half * a2;
                    u1[k] += self.dt * vh1[k];
                    u2[k] += self.dt * vh2[k];
                }
            }
        }

        // refresh the spatial tension at the drifted position
        spatial_tension(&self.state.u, &mut self.spatial, &mut self.exp_m2u2);

        // kick 2, Γ̄(v,v) evaluated with the half-step velocity
        let sp1 = &self.spatial.v1.data;
        let sp2 = &self.spatial.v2.data;
        let exps = &self.exp_m2u2;
        for j in 1..g.n2 - 1 {
            for i in 1..n1 - 1 {
                let k = j * n1 + i;
                let a1 = sp1[k] + 2.0 * self.vh1[k] * self.vh2[k];
                let a2 = sp2[k] - exps[k] * self.vh1[k] * self.vh1[k];
                self.state.v1.data[k] = self.vh1[k] + half * a1;
                self.state.v2.data[k] = self.vh2[k] + half * a2;
            }
        }
        self.steps_taken += 1;
        self.state.t += self.dt;
        self.state.validate(self.steps_taken)
    }
}

/// One leapfrog step of size `dt` (errors on CFL violation or blow-up).
pub fn wave_step(state: &WaveState, anchor: &MapField, dt: f64) -> Result<WaveState> {
    let mut stepper = WaveStepper::new(state.clone(), anchor.clone(), dt)?;
    stepper.step()?;
    Ok(stepper.state)
}

/// Conserved energy `½∫( e^{-2u²}(v¹)² + (v²)² + |du|² ) dvol`.
pub fn wave_energy(state: &WaveState) -> f64 {
    let g = state.grid();
    let density = energy_density(&state.u);
    let mut total = ScalarField::zeros(&g);
    for k in 0..g.len() {
        let em2u2 = (-2.0 * state.u.u2.data[k]).exp();
        total.data[k] = em2u2 * state.v1.data[k] * state.v1.data[k]
            + state.v2.data[k] * state.v2.data[k]
            + density.data[k];
    }
    0.5 * integrate_volume(&total)
}

/// Emitted state sample.
#[derive(Clone, Debug)]
pub struct WaveSample {
    pub t: f64,
    pub state: WaveState,
}

/// Energy/distance row of the run series.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DistanceRow {
    pub t: f64,
    pub energy: f64,
    pub sup_dist: f64,
    pub l2_dist: f64,
}

/// Result of a wave-map run.
#[derive(Debug)]
pub struct WaveRun {
    pub dt: f64,
    pub steps: usize,
    pub samples: Vec<WaveSample>,
    pub series: Vec<DistanceRow>,
}

/// Integrate to `t_max`, sampling states and the energy/distance series.
///
/// Distances are measured against `reference` (the unperturbed map, which
/// is also the frozen boundary).
pub fn run_wave_map(state0: &WaveState, reference: &MapField, cfg: &WaveConfig) -> Result<WaveRun> {
    cfg.validate()?;
    let g = state0.grid();
    let (dt, steps) = step_layout(&g, cfg);
    let mut sample_steps: Vec<usize> = cfg
        .sample_times
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(steps))
        .collect();
    sample_steps.sort_unstable();
    sample_steps.dedup();

    let mut stepper = WaveStepper::new(state0.clone(), reference.clone(), dt)?;
    let mut samples = Vec::new();
    let mut series = Vec::new();
    let record = |stepper: &WaveStepper, series: &mut Vec<DistanceRow>| {
        let dfield = distance_field(&stepper.state.u, stepper.anchor());
        series.push(DistanceRow {
            t: stepper.state.t,
            energy: wave_energy(&stepper.state),
            sup_dist: sup_norm(&dfield),
            l2_dist: l2_norm(&dfield),
        });
    };

    if sample_steps.first() == Some(&0) {
        sample_steps.remove(0);
        samples.push(WaveSample {
            t: 0.0,
            state: stepper.state.clone(),
        });
    }
    record(&stepper, &mut series);
    for step in 1..=steps {
        stepper.step()?;
        if step % cfg.energy_every == 0 || step == steps {
            record(&stepper, &mut series);
        }
        if sample_steps.first() == Some(&step) {
            sample_steps.remove(0);
            samples.push(WaveSample {
                t: stepper.state.t,
                state: stepper.state.clone(),
            });
        }
    }
    Ok(WaveRun {
        dt,
        steps,
        samples,
        series,
    })
}

/// Relative spread `(max E - min E)/E(0)` of the recorded series.
pub fn energy_spread(series: &[DistanceRow]) -> f64 {
    let e0 = series[0].energy;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in series {
        lo = lo.min(row.energy);
        hi = hi.max(row.energy);
    }
    if e0 == 0.0 {
        hi - lo
    } else {
        (hi - lo) / e0
    }
}

/// L²(dvol) norm of the coordinate difference of two maps.
pub fn coordinate_l2_diff(a: &MapField, b: &MapField) -> f64 {
    let g = a.grid().clone();
    let mut diff = ScalarField::zeros(&g);
    for k in 0..g.len() {
        let d1 = a.u1.data[k] - b.u1.data[k];
        let d2 = a.u2.data[k] - b.u2.data[k];
        diff.data[k] = (d1 * d1 + d2 * d2).sqrt();
    }
    l2_norm(&diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sup_distance;
    use crate::harmonic::{construct_admissible, dirichlet_energy, HolomorphicSpec};

    fn small_setup() -> (MapField, BumpSpec) {
        let g = Grid::build(4.0, 4.0, 81, 81).unwrap();
        let q = construct_admissible(&HolomorphicSpec::scaled_identity(0.1), &g).unwrap();
        let bump = BumpSpec {
            center: [0.0, 0.0],
            width: 0.5,
            amplitude: 0.01,
            component: 1,
        };
        (q, bump)
    }

    #[test]
    fn perturb_zero_amplitude_is_exact() {
        let (q, mut bump) = small_setup();
        bump.amplitude = 0.0;
        let (state, horizon) = perturb(&q, &bump).unwrap();
        assert_eq!(state.u.u1.data, q.u1.data);
        assert_eq!(state.u.u2.data, q.u2.data);
        assert_eq!(sup_norm(&state.v1), 0.0);
        assert!(horizon > 0.0);
    }

    #[test]
    fn perturb_rejects_boundary_support() {
        let (q, mut bump) = small_setup();
        bump.center = [3.5, 0.0];
        assert!(perturb(&q, &bump).is_err());
    }

    #[test]
    fn perturbation_size_tracks_amplitude() {
        let (q, bump) = small_setup();
        let (state, _) = perturb(&q, &bump).unwrap();
        let d = sup_distance(&state.u, &q);
        // coordinate bump of height a has hyperbolic size a·(1 + O(a) + O(Q²))
        assert!((d - bump.amplitude).abs() < 0.1 * bump.amplitude, "sup dist {d}");

        let mut double = bump.clone();
        double.amplitude *= 2.0;
        let (state2, _) = perturb(&q, &double).unwrap();
        let r = coordinate_l2_diff(&state2.u, &q) / coordinate_l2_diff(&state.u, &q);
        assert!((r - 2.0).abs() < 1e-12, "linearity ratio {r}");
    }

    #[test]
    fn constant_map_is_a_fixed_point() {
        let g = Grid::build(2.0, 2.0, 21, 21).unwrap();
        let q = MapField::constant(&g, 0.4, -0.3);
        let state = WaveState::resting(q.clone());
        let dt = 0.5 * cfl_limit(&g);
        let next = wave_step(&state, &q, dt).unwrap();
        assert_eq!(next.u.u1.data, state.u.u1.data);
        assert_eq!(next.u.u2.data, state.u.u2.data);
        assert_eq!(next.v1.data, state.v1.data);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = Grid::build(2.0, 2.0, 21, 21).unwrap();
        let q = MapField::constant(&g, 0.0, 0.0);
        let state = WaveState::resting(q.clone());
        assert!(wave_step(&state, &q, 10.0 * cfl_limit(&g)).is_err());
    }

    #[test]
    fn single_step_time_reversal_is_third_order() {
        let (q, bump) = small_setup();
        let (state, _) = perturb(&q, &bump).unwrap();
        let err = |dt: f64| {
            let fwd = wave_step(&state, &q, dt).unwrap();
            let back = wave_step(&fwd.reversed(), &q, dt).unwrap();
            let du = sup_distance(&back.u, &state.u);
            let dv = sup_norm(&back.v1).max(sup_norm(&back.v2));
            du.max(dv)
        };
        let limit = cfl_limit(&state.grid());
        let (e1, e2) = (err(0.8 * limit), err(0.4 * limit));
        let order = (e1 / e2).log2();
        assert!(order > 2.5, "reversal order {order} (e1={e1}, e2={e2})");
    }

    fn run_final_state(
        state: &WaveState,
        q: &MapField,
        t_max: f64,
        cfl: f64,
    ) -> (WaveState, f64, usize) {
        let dt_raw = cfl * cfl_limit(&state.grid());
        let steps = (t_max / dt_raw).ceil() as usize;
        let dt = t_max / steps as f64;
        let mut stepper = WaveStepper::new(state.clone(), q.clone(), dt).unwrap();
        for _ in 0..steps {
            stepper.step().unwrap();
        }
        (stepper.state, dt, steps)
    }

    #[test]
    fn global_time_reversal_is_second_order() {
        let (q, bump) = small_setup();
        let (state, _) = perturb(&q, &bump).unwrap();
        let recover = |cfl: f64| {
            let (end, dt, steps) = run_final_state(&state, &q, 0.5, cfl);
            let mut stepper = WaveStepper::new(end.reversed(), q.clone(), dt).unwrap();
            for _ in 0..steps {
                stepper.step().unwrap();
            }
            sup_distance(&stepper.state.u, &state.u)
        };
        let (e1, e2) = (recover(0.8), recover(0.4));
        let order = (e1 / e2).log2();
        assert!(order > 1.7, "global reversal order {order} (e1={e1}, e2={e2})");
    }

    #[test]
    fn energy_examples() {
        let g = Grid::build(2.0, 2.0, 21, 21).unwrap();
        let cmap = MapField::constant(&g, 0.0, 0.0);
        assert_eq!(wave_energy(&WaveState::resting(cmap)), 0.0);

        let (q, bump) = small_setup();
        let resting = WaveState::resting(q.clone());
        assert!((wave_energy(&resting) - dirichlet_energy(&q)).abs() < 1e-14);
        let (state, _) = perturb(&q, &bump).unwrap();
        assert!(wave_energy(&state) > dirichlet_energy(&q));
    }

    #[test]
    fn energy_spread_stays_small_over_thousand_steps() {
        let (q, bump) = small_setup();
        let (state, _) = perturb(&q, &bump).unwrap();
        let g = state.grid();
        let dt = 0.9 * cfl_limit(&g);
        let mut stepper = WaveStepper::new(state, q, dt).unwrap();
        let mut energies = vec![wave_energy(&stepper.state)];
        for _ in 0..1000 {
            stepper.step().unwrap();
            energies.push(wave_energy(&stepper.state));
        }
        let e0 = energies[0];
        let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((hi - lo) / e0 <= 1e-3, "relative spread {}", (hi - lo) / e0);
        // linear-drift bound: |fit slope|·t_max ≤ 1e-3·E(0)
        let n = energies.len() as f64;
        let mean_t: f64 = (0..energies.len()).map(|k| k as f64 * dt).sum::<f64>() / n;
        let mean_e: f64 = energies.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, e) in energies.iter().enumerate() {
            let tt = k as f64 * dt - mean_t;
            num += tt * (e - mean_e);
            den += tt * tt;
        }
        let slope = num / den;
        assert!((slope * 1000.0 * dt).abs() <= 1e-3 * e0);
    }

    #[test]
    fn finite_propagation_outside_numeric_cone() {
        // constant map: an exact discrete fixed point away from the bump, so
        // anything outside the numeric domain of dependence stays at the
        // reference to round-off
        let g = Grid::build(4.0, 4.0, 81, 81).unwrap();
        let q = MapField::constant(&g, 0.2, -0.1);
        let bump = BumpSpec {
            center: [0.0, 0.0],
            width: 0.3,
            amplitude: 0.01,
            component: 1,
        };
        let (state, _) = perturb(&q, &bump).unwrap();
        let dt = 0.9 * cfl_limit(&g);
        let t_end: f64 = 0.5;
        let steps = (t_end / dt).ceil() as usize;
        let mut stepper = WaveStepper::new(state, q.clone(), dt).unwrap();
        for _ in 0..steps {
            stepper.step().unwrap();
        }
        // Gaussian tail is below 4e-18·amplitude beyond 6.4 widths
        let rho0 = 6.4 * bump.width;
        let speed1 = g.dx1 / dt;
        let speed2 = g.dx2 / dt;
        let t = stepper.state.t;
        let mut worst = 0.0f64;
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let out1 = (g.x1s[i] - bump.center[0]).abs() > rho0 + t * speed1;
                let out2 = (g.x2s[j] - bump.center[1]).abs() > rho0 + t * speed2;
                if out1 || out2 {
                    let k = g.idx(i, j);
                    worst = worst
                        .max((stepper.state.u.u1.data[k] - q.u1.data[k]).abs())
                        .max((stepper.state.u.u2.data[k] - q.u2.data[k]).abs());
                }
            }
        }
        assert!(worst < 1e-10, "leakage outside the cone: {worst}");
    }

    #[test]
    fn zero_perturbation_run_is_static() {
        let g = Grid::build(2.0, 2.0, 21, 21).unwrap();
        let q = MapField::constant(&g, 0.0, 0.5);
        let cfg = WaveConfig {
            t_max: 0.2,
            cfl: 0.9,
            sample_times: vec![0.0, 0.1, 0.2],
            bump: BumpSpec {
                center: [0.0, 0.0],
                width: 0.3,
                amplitude: 0.0,
                component: 1,
            },
            energy_every: 10,
        };
        let (state, _) = perturb(&q, &cfg.bump).unwrap();
        let run = run_wave_map(&state, &q, &cfg).unwrap();
        assert_eq!(run.samples.len(), 3);
        for s in &run.samples {
            assert_eq!(s.state.u.u1.data, q.u1.data);
        }
        for row in &run.series {
            assert_eq!(row.sup_dist, 0.0);
        }
    }
}
