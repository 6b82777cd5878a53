use eaf_core::plant::presets;
use eaf_core::prices::{fit_bucketizer, synth_prices, SynthProfile};
use eaf_core::qlearn::*;

fn main() {
    let plant = presets::homogeneous_three();
    let (dap, rtp) = synth_prices(7, 120, &SynthProfile::default());
    let (dap_train, dap_test) = dap.split_days(0.5);
    let (_, rtp_test) = rtp.split_days(0.5);
    let bucketizer = fit_bucketizer(&dap_train).unwrap();

    for episodes in [600usize, 36000] {
        let mut config = RLConfig::with_uniform_kappa(3, 16.0, 7);
        config.episodes = episodes;
        let t0 = std::time::Instant::now();
        let (table, trace) = match train(&plant, &dap_train, &bucketizer, &config) { Ok(x) => x, Err(e) => { println!("train error: {e}"); return; } };
        let train_time = t0.elapsed();
        let report = match evaluate(&table, &dap_test, &rtp_test, &bucketizer, &plant, &EvalOptions::default()) { Ok(r) => r, Err(e) => { println!("eval error: {e}"); return; } };
        // TD convergence shape: median of rolling-median |td| over segments.
        let stats = td_trace_stats(&trace, 9).unwrap();
        let head = median(&stats[..stats.len() / 20]);
        let tail = median(&stats[stats.len() - stats.len() / 10..]);
        println!(
            "episodes {episodes}: profit {:.0} startups {} util {:.3} | td head {:.3} tail {:.3} | visited {} | train {:?}",
            report.profit, report.startups, report.utilization, head, tail, table.visited_entries(), train_time
        );
        // Q at a cheap-bucket idle state (bucket 1 = lowest level, flat trend).
        let idle = EnvState::idle(1, 3);
        for a in [0u64, 1, 3] {
            print!("  Q(z=1 idle, {a:03b}) = {:+.2} (v{})", table.value(idle.index(), a), table.visits(idle.index(), a));
        }
        println!();
    }
}
