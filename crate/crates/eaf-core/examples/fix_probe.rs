use eaf_core::lp::simplex::{EngineOutcome, SimplexEngine};
use eaf_core::lp::SimplexOptions;
use eaf_core::milp::{build_window, idle_boundary, VarRole, WindowOptions};
use eaf_core::plant::presets;

fn main() {
    let mut plant = presets::homogeneous_three();
    plant.units.truncate(1);
    let w = build_window(&plant, &vec![0.0; 40], &idle_boundary(1), &WindowOptions::default()).unwrap();
    let mut engine = SimplexEngine::new(&w.model, SimplexOptions::default());
    match engine.solve_primal(Some(&w.structural_basis)).unwrap() {
        EngineOutcome::Optimal => println!("root obj {:.4}", engine.max_objective()),
        EngineOutcome::Infeasible(r) => panic!("infeasible {r:?}"),
    }
    let snap = engine.snapshot();

    // Two hand-packed cycles: y at t0 and t17, melt 15 steps each, taps ride along.
    let mut fix = |t: usize, role: VarRole, v: f64, engine: &mut SimplexEngine| {
        let col = w.var(t, 0, role);
        engine.set_var_bounds(col, v, v);
    };
    for t in 0..40 {
        let (u, v, y) = if t <= 15 {
            (1.0, if t <= 14 { 1.0 } else { 0.0 }, if t == 0 { 1.0 } else { 0.0 })
        } else if t == 16 {
            (0.0, 0.0, 0.0)
        } else if t <= 32 {
            (1.0, if t <= 31 { 1.0 } else { 0.0 }, if t == 17 { 1.0 } else { 0.0 })
        } else {
            (0.0, 0.0, 0.0)
        };
        fix(t, VarRole::On, u, &mut engine);
        fix(t, VarRole::Melting, v, &mut engine);
        fix(t, VarRole::Startup, y, &mut engine);
    }
    match engine.resolve_dual_from(&snap).unwrap() {
        EngineOutcome::Optimal => println!("two-cycle obj {:.6} iters {}", engine.max_objective(), engine.iterations),
        EngineOutcome::Infeasible(r) => println!("two-cycle infeasible rows {r:?}"),
    }
}
