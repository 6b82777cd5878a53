use eaf_core::lp::simplex::{EngineOutcome, SimplexEngine};
use eaf_core::lp::SimplexOptions;
use eaf_core::milp::{build_window, idle_boundary, WindowOptions};
use eaf_core::plant::presets;

fn main() {
    let mut plant = presets::homogeneous_three();
    plant.units.truncate(1);
    let w = build_window(&plant, &vec![0.0; 40], &idle_boundary(1), &WindowOptions::default()).unwrap();
    let binaries = w.model.binary_indices();
    let mut engine = SimplexEngine::new(&w.model, SimplexOptions::default());
    engine.solve_primal(Some(&w.structural_basis)).unwrap();
    let snap = engine.snapshot();
    let mut values = engine.struct_values();

    for round in 0..200 {
        let mut fracs: Vec<(usize, f64)> = binaries.iter().map(|&j| (j, values[j]))
            .filter(|&(_, f)| f.min(1.0 - f) > 1e-6).collect();
        if fracs.is_empty() {
            println!("round {round}: integral, obj {:.4}", engine.max_objective());
            break;
        }
        // near-integral batch
        let batch: Vec<(usize, u8)> = fracs.iter().filter(|&&(_, f)| f.min(1.0 - f) <= 0.2)
            .map(|&(j, f)| (j, u8::from(f >= 0.5))).collect();
        let chosen = if batch.is_empty() {
            fracs.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            let &(j, f) = fracs.last().unwrap();
            vec![(j, 1u8, f)]
        } else {
            batch.iter().map(|&(j, v)| (j, v, values[j])).collect()
        };
        for &(j, v, _) in &chosen {
            engine.set_var_bounds(j, v as f64, v as f64);
        }
        match engine.resolve_dual_from(&snap).unwrap() {
            EngineOutcome::Optimal => {
                values = engine.struct_values();
                if round < 12 || round % 10 == 0 {
                    println!("round {round}: fixed {} vars (sample var {} -> {}), obj {:.4}",
                        chosen.len(), chosen[0].0, chosen[0].1, engine.max_objective());
                }
            }
            EngineOutcome::Infeasible(r) => {
                println!("round {round}: INFEASIBLE fixing {} vars (first var {} -> {}) rows {:?}",
                    chosen.len(), chosen[0].0, chosen[0].1, r);
                break;
            }
        }
    }
}
