use eaf_core::lp::simplex::{EngineOutcome, SimplexEngine};
use eaf_core::lp::{solve_lp, LpOutcome, SimplexOptions};
use eaf_core::milp::{build_window, idle_boundary, VarRole, WindowOptions};
use eaf_core::plant::presets;

fn main() {
    let plant = presets::homogeneous_three();
    let prices: Vec<f64> = (0..48).map(|t| 16.0 + 3.0 * ((t as f64) / 7.0).sin()).collect();
    let w = build_window(&plant, &prices, &idle_boundary(3), &WindowOptions::default()).unwrap();

    // Independent check of the root LP via the hinted path and cold start.
    match solve_lp(&w.model).unwrap() {
        LpOutcome::Optimal(s) => println!("cold root LP obj {:.4} dual_feasible {} iters {}", s.objective, s.dual_feasible, s.iterations),
        _ => unreachable!(),
    }
    let mut engine = SimplexEngine::new(&w.model, SimplexOptions::default());
    match engine.solve_primal(Some(&w.structural_basis)).unwrap() {
        EngineOutcome::Optimal => println!("hinted root LP obj {:.4} dual_feasible {}", engine.max_objective(), engine.dual_feasible()),
        EngineOutcome::Infeasible(r) => panic!("infeasible {r:?}"),
    }
    let snap = engine.snapshot();

    // Hand-packed: units 0 and 1 run two staggered cycles each; unit 2 idles.
    // Cycle pattern per unit: y at t0, melt t0..14, taps ride, settle t15, restart t17.
    let schedule = |start: usize| -> Vec<(usize, (f64, f64, f64))> {
        let mut v = Vec::new();
        for c in 0..2 {
            let s0 = start + c * 17;
            for t in s0..s0 + 16 {
                if t >= 48 { break; }
                let melting = t < s0 + 15;
                v.push((t, (1.0, if melting { 1.0 } else { 0.0 }, if t == s0 { 1.0 } else { 0.0 })));
            }
        }
        v
    };
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    for t in 0..48 {
        for i in 0..3 {
            let sched = match i { 0 => schedule(0), 1 => schedule(0), _ => Vec::new() };
            let found = sched.iter().find(|&&(tt, _)| tt == t).map(|&(_, uvy)| uvy).unwrap_or((0.0, 0.0, 0.0));
            fixed.push((w.var(t, i, VarRole::On), found.0));
            fixed.push((w.var(t, i, VarRole::Melting), found.1));
            fixed.push((w.var(t, i, VarRole::Startup), found.2));
        }
    }
    for &(c, v) in &fixed { engine.set_var_bounds(c, v, v); }
    match engine.resolve_dual_from(&snap).unwrap() {
        EngineOutcome::Optimal => println!("packed (2 units x 2 cycles) obj {:.4}", engine.max_objective()),
        EngineOutcome::Infeasible(r) => println!("packed infeasible rows {r:?}"),
    }
}
