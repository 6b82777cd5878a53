use eaf_core::milp::{build_window, solve_mip, MipOptions, WindowOptions};
use eaf_core::plant::{presets, FurnaceState};
use eaf_core::prices::{synth_prices, SynthProfile};

fn main() {
    let plant = presets::homogeneous_three();
    let (_, rtp) = synth_prices(7, 120, &SynthProfile::default());
    let (_, rtp_test) = rtp.split_days(0.5);
    // First 4 windows of the test split, idle boundary each (diagnostic).
    for w in 0..4 {
        let t0 = w * 12;
        let prices = &rtp_test.values[t0..t0 + 48];
        let pmin = prices.iter().cloned().fold(f64::INFINITY, f64::min);
        let pmax = prices.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let window = build_window(&plant, prices, &vec![FurnaceState::default(); 3], &WindowOptions::default()).unwrap();
        for nl in [1usize, 60, 400] {
            let opts = MipOptions { rel_gap: 1e-3, node_limit: nl, ..MipOptions::default() };
            let sol = solve_mip(&window, &opts).unwrap();
            print!("  nl{nl}: obj {:.1} ({:?} n{})", sol.objective, sol.status, sol.nodes);
        }
        println!("  | window {w} prices [{pmin:.0},{pmax:.0}]");
    }
}
