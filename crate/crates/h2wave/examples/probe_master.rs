use h2wave::gauge::{caloric_family, identity_residuals, limit_connection, wave_tension_field};
use h2wave::grid::Grid;
use h2wave::harmonic::{construct_admissible, HolomorphicSpec};
use h2wave::heat::HeatConfig;
use h2wave::master::master_equation_residual;
use h2wave::util::log_ladder;
use h2wave::wave::{perturb, run_wave_map, BumpSpec, WaveConfig};

fn main() {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(61usize);
    let g = Grid::build(5.0, 3.0, (n - 1) * 5 / 3 + 1, n).unwrap();
    let q_analytic = construct_admissible(&HolomorphicSpec::scaled_identity(0.1), &g).unwrap();
    // polish to the discrete harmonic map so the background is quiescent
    let polish = HeatConfig {
        s_max: 30.0,
        ds_safety: 0.9,
        snapshot_s: vec![],
        stop_tol: 0.0,
    };
    let relax = h2wave::heat::run_heat_flow(&q_analytic, &q_analytic, &polish).unwrap();
    println!("polish: converged={} steps={} final sup tau={:.3e}",
        relax.converged, relax.steps, relax.diagnostics.last().unwrap().sup_dsu);
    let q = relax.final_u.clone();
    let bump = BumpSpec { center: [0.0, 0.0], width: 0.5, amplitude: 0.01, component: 1 };
    let (state, horizon) = perturb(&q, &bump).unwrap();
    println!("clean window horizon: {horizon:.3}");

    // 5 slices around t = 1.0, spacing an exact step multiple near 0.02
    let t_c = 1.0;
    let mut cfg = WaveConfig {
        t_max: t_c + 2.0 * 0.025,
        cfl: 0.9,
        sample_times: vec![],
        bump: bump.clone(),
        energy_every: 1000,
    };
    let (dt, steps) = h2wave::wave::step_layout(&g, &cfg);
    let m = (0.02 / dt).round() as usize;
    let delta = m as f64 * dt;
    let c_step = steps - 2 * m;
    let times: Vec<f64> = (-2i64..=2).map(|k| (c_step as i64 + k * m as i64) as f64 * dt).collect();
    cfg.sample_times = times.clone();
    let run = run_wave_map(&state, &q, &cfg).unwrap();
    println!("wave dt = {:.3e}, steps = {}, delta = {delta:.6}", run.dt, run.steps);
    let slices: Vec<(f64, h2wave::grid::MapField)> = run
        .samples
        .iter()
        .map(|s| (s.t, s.state.u.clone()))
        .collect();
    for w in slices.windows(2) {
        println!("slice spacing {:.6e}", w[1].0 - w[0].0);
    }

    // master equation at s* = 0.25 with neighbors
    let hcfg = HeatConfig {
        s_max: 0.3,
        ds_safety: 0.9,
        snapshot_s: vec![0.0, 0.2, 0.25, 0.3],
        stop_tol: 0.0,
    };
    let family = caloric_family(&slices, &q, &hcfg).unwrap();
    println!("max frame defect {:.3e}, mismatch {:.3e}", family.max_defect, family.final_mismatch);
    let limit = limit_connection(&q, 1.0).unwrap();
    let rep = master_equation_residual(&family, 0.25, &limit).unwrap();
    println!("== master equation at s=0.25, n={n} ==");
    for t in &rep.terms {
        println!("  {:<22} {:.6e}", t.name, t.l2);
    }
    println!("  residual      {:.6e}", rep.residual_l2);
    println!("  residual_noW  {:.6e}", rep.residual_without_w_l2);
    println!("  max_term      {:.6e}", rep.max_term_l2);
    println!("  ratio          {:.3}", rep.max_term_l2 / rep.residual_l2);
    println!("  ablation ratio {:.3}", rep.residual_without_w_l2 / rep.residual_l2);

    // wave tension at s = 0
    let s0 = family.s_index(0.0).unwrap();
    let w0 = wave_tension_field(&family, s0).unwrap();
    println!("wave tension at s=0: sup {:.6e}", w0.sup_interior());

    // identity residuals on a short ladder family (3 slices suffice)
    let slices3 = &slices[1..4];
    let hcfg2 = HeatConfig {
        s_max: 8.0,
        ds_safety: 0.9,
        snapshot_s: log_ladder(0.01, 8.0),
        stop_tol: 0.0,
    };
    let fam3 = caloric_family(slices3, &q, &hcfg2).unwrap();
    let idr = identity_residuals(&fam3).unwrap();
    println!("== identities ==\n{:#?}", idr);
}
