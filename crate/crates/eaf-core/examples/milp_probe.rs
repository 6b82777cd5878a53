use eaf_core::lp::{solve_lp, LpOutcome};
use eaf_core::milp::{build_window, idle_boundary, solve_mip, MipOptions, WindowOptions};
use eaf_core::plant::presets;
use std::time::Instant;

fn main() {
    // Pathological corner: free energy, single unit.
    let mut plant1 = presets::homogeneous_three();
    plant1.units.truncate(1);
    let w = build_window(&plant1, &vec![0.0; 40], &idle_boundary(1), &WindowOptions::default()).unwrap();
    let t0 = Instant::now();
    let opts = MipOptions { rel_gap: 1e-3, node_limit: 2000, ..MipOptions::default() };
    let sol = solve_mip(&w, &opts).unwrap();
    println!("[1u/H40/l0]  obj {:.4} status {:?} gap {:.2e} nodes {} in {:?}", sol.objective, sol.status, sol.gap, sol.nodes, t0.elapsed());

    // Realistic window: N=3, H=48, daily price shape.
    let plant = presets::homogeneous_three();
    let prices: Vec<f64> = (0..48).map(|t| {
        let h = (t as f64) * 5.0 / 60.0 + 10.0; // 10:00 .. 14:00
        40.0 - 25.0 * (std::f64::consts::PI * (h - 3.0) / 15.0).cos()
    }).collect();
    let w = build_window(&plant, &prices, &idle_boundary(3), &WindowOptions::default()).unwrap();
    match solve_lp(&w.model).unwrap() {
        LpOutcome::Optimal(s) => println!("[3u/H48] root LP obj {:.4} iters {}", s.objective, s.iterations),
        _ => unreachable!(),
    }
    for (gap, nl) in [(1e-3, 4000usize), (1e-4, 20000)] {
        let t0 = Instant::now();
        let opts = MipOptions { rel_gap: gap, node_limit: nl, ..MipOptions::default() };
        let sol = solve_mip(&w, &opts).unwrap();
        println!("[3u/H48/gap{gap:.0e}] obj {:.4} status {:?} gap {:.2e} nodes {} in {:?}", sol.objective, sol.status, sol.gap, sol.nodes, t0.elapsed());
    }

    // Cheap-trough window (prices low everywhere: lots of activity).
    let prices: Vec<f64> = (0..48).map(|t| 16.0 + 3.0 * ((t as f64) / 7.0).sin()).collect();
    let w = build_window(&plant, &prices, &idle_boundary(3), &WindowOptions::default()).unwrap();
    let t0 = Instant::now();
    let opts = MipOptions { rel_gap: 1e-3, node_limit: 4000, ..MipOptions::default() };
    let sol = solve_mip(&w, &opts).unwrap();
    println!("[3u/H48 cheap] obj {:.4} status {:?} gap {:.2e} nodes {} in {:?}", sol.objective, sol.status, sol.gap, sol.nodes, t0.elapsed());
}
