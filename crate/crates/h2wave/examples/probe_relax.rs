use h2wave::grid::{Grid, MapField, VectorField};
use h2wave::harmonic::{construct_admissible, HolomorphicSpec};
use h2wave::heat::{run_heat_flow_observed, HeatConfig, HeatObserver};

struct Spy {
    every: usize,
}

impl HeatObserver for Spy {
    fn on_state(&mut self, step: usize, s: f64, u: &MapField, tau: &VectorField, _snap: bool) {
        if step % self.every != 0 {
            return;
        }
        let g = u.grid().clone();
        let mut worst = 0.0f64;
        let mut at = 0usize;
        for k in 0..g.len() {
            let v = tau.v1.data[k].abs().max(tau.v2.data[k].abs());
            if v > worst {
                worst = v;
                at = k;
            }
        }
        let (i, j) = (at % g.n1, at / g.n1);
        println!(
            "step {step:6} s={s:9.4}: sup|tau| = {worst:.6e} at ({i},{j}) x=({:.2},{:.2})",
            g.x1s[i], g.x2s[j]
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(61);
    let safety: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let ext: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(6.0);
    let g = Grid::build(ext, ext, n, n).unwrap();
    let q = construct_admissible(&HolomorphicSpec::scaled_identity(0.1), &g).unwrap();
    let cfg = HeatConfig {
        s_max: 40.0,
        ds_safety: safety,
        snapshot_s: vec![],
        stop_tol: 1e-12,
    };
    let mut spy = Spy { every: 100 };
    match run_heat_flow_observed(&q, &q, &cfg, &mut spy) {
        Ok(t) => println!(
            "converged={} steps={} final sup={:.3e}",
            t.converged,
            t.steps,
            t.diagnostics.last().unwrap().sup_dsu
        ),
        Err(e) => println!("FAILED: {e}"),
    }
}
