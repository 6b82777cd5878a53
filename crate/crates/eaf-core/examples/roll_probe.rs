use eaf_core::plant::presets;
use eaf_core::prices::{synth_prices, SynthProfile};
use eaf_core::rolling::{run_rolling, RollingConfig};
use std::time::Instant;

fn main() {
    let plant = presets::homogeneous_three();
    let (_, rtp) = synth_prices(7, 120, &SynthProfile::default());
    let (_, rtp_test) = rtp.split_days(0.5);
    for days in [1usize] {
        let slice = rtp_test.slice(0, days * 288);
        for nl in [60usize, 300, 1000] {
            let cfg = RollingConfig { horizon: 48, step: 12, rel_gap: 1e-3, node_limit: nl, checkpoint_dir: None };
            let t0 = Instant::now();
            let res = run_rolling(&plant, &slice, &cfg).unwrap();
            println!("days {days} nl {nl}: profit {:.1} in {:.2?} | nodes {} at-limit {}/{}",
                res.log.cumulative_profit, t0.elapsed(), res.nodes_total, res.windows_at_node_limit, res.windows);
        }
    }
}
