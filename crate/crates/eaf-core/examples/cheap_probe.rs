use eaf_core::milp::{build_window, idle_boundary, solve_mip, MipOptions, WindowOptions};
use eaf_core::plant::presets;
use std::time::Instant;

fn main() {
    let plant = presets::homogeneous_three();
    let prices: Vec<f64> = (0..48).map(|t| 16.0 + 3.0 * ((t as f64) / 7.0).sin()).collect();
    let w = build_window(&plant, &prices, &idle_boundary(3), &WindowOptions::default()).unwrap();
    let t0 = Instant::now();
    let opts = MipOptions { rel_gap: 1e-3, node_limit: 4000, ..MipOptions::default() };
    match solve_mip(&w, &opts) {
        Ok(sol) => println!("obj {:.4} status {:?} gap {:.2e} nodes {} in {:?}", sol.objective, sol.status, sol.gap, sol.nodes, t0.elapsed()),
        Err(e) => println!("error after {:?}: {e}", t0.elapsed()),
    }
}
