use h2wave::gauge::caloric_family;
use h2wave::grid::{sup_norm, Grid};
use h2wave::harmonic::{construct_admissible, HolomorphicSpec};
use h2wave::heat::HeatConfig;
use h2wave::wave::{perturb, run_wave_map, step_layout, BumpSpec, WaveConfig};

fn main() {
    let n = 61usize;
    let g = Grid::build(6.0, 6.0, n, n).unwrap();
    let q = construct_admissible(&HolomorphicSpec::scaled_identity(0.1), &g).unwrap();
    let bump = BumpSpec { center: [0.0, 0.0], width: 0.5, amplitude: 0.01, component: 1 };
    let (state, _) = perturb(&q, &bump).unwrap();
    let t_c = 1.0;
    let mut cfg = WaveConfig {
        t_max: t_c + 0.05,
        cfl: 0.9,
        sample_times: vec![],
        bump: bump.clone(),
        energy_every: 100000,
    };
    let (dt, steps) = step_layout(&g, &cfg);
    let m = (0.02 / dt).round() as usize;
    let c_step = steps - 2 * m;
    cfg.sample_times = (-2i64..=2)
        .map(|k| (c_step as i64 + k * m as i64) as f64 * dt)
        .collect();
    let run = run_wave_map(&state, &q, &cfg).unwrap();
    let slices: Vec<(f64, h2wave::grid::MapField)> =
        run.samples.iter().map(|s| (s.t, s.state.u.clone())).collect();

    let hcfg = HeatConfig {
        s_max: 0.3,
        ds_safety: 0.9,
        snapshot_s: vec![0.0, 0.2, 0.25, 0.3],
        stop_tol: 0.0,
    };
    let family = caloric_family(&slices, &q, &hcfg).unwrap();
    let s_idx = family.s_index(0.25).unwrap();
    let delta = family.delta_t;
    println!("delta_t = {delta:.6e}");
    for sl in 0..5 {
        let snap = family.snapshot(sl, s_idx);
        println!(
            "slice {sl}: sup phis = ({:.6e}, {:.6e}), sup a1 = {:.6e}",
            sup_norm(&snap.phis.c1),
            sup_norm(&snap.phis.c2),
            sup_norm(&snap.a1)
        );
    }
    // raw second difference at center
    let c = family.center();
    let p = &family.snapshot(c - 1, s_idx).phis;
    let o = &family.snapshot(c, s_idx).phis;
    let nx = &family.snapshot(c + 1, s_idx).phis;
    let mut worst = 0.0f64;
    let mut at = 0usize;
    for k in 0..g.len() {
        let d = (nx.c1.data[k] - 2.0 * o.c1.data[k] + p.c1.data[k]).abs();
        if d > worst {
            worst = d;
            at = k;
        }
    }
    let (i, j) = (at % g.n1, at / g.n1);
    println!(
        "max |Δ²_t φₛ¹| = {worst:.6e} at ({i},{j}) x=({:.2},{:.2}); /δ² = {:.6e}",
        g.x1s[i],
        g.x2s[j],
        worst / (delta * delta)
    );
    println!(
        "values there: {:.8e} {:.8e} {:.8e}",
        p.c1.data[at], o.c1.data[at], nx.c1.data[at]
    );
    // first difference scale for comparison
    let mut worst1 = 0.0f64;
    for k in 0..g.len() {
        worst1 = worst1.max((nx.c1.data[k] - p.c1.data[k]).abs());
    }
    println!("max |Δ_t φₛ¹| = {worst1:.6e}; /2δ = {:.6e}", worst1 / (2.0 * delta));
}
