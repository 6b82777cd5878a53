use eaf_core::plant::presets;
use eaf_core::prices::{synth_prices, SynthProfile};
use eaf_core::rolling::{run_rolling, RollingConfig};

fn main() {
    let plant = presets::homogeneous_three();
    let (_, rtp) = synth_prices(7, 120, &SynthProfile::default());
    let (_, rtp_test) = rtp.split_days(0.5);
    let slice = rtp_test.slice(0, 288);
    let cfg = RollingConfig { horizon: 48, step: 12, rel_gap: 1e-3, node_limit: 60, checkpoint_dir: None };
    let res = run_rolling(&plant, &slice, &cfg).unwrap();
    let log = &res.log;
    let charged: f64 = log.steps.iter().map(|s| s.units.iter().map(|u| u.input).sum::<f64>()).sum();
    let tapped: f64 = log.steps.iter().map(|s| s.units.iter().map(|u| u.tap_rate).sum::<f64>()).sum();
    let melted: f64 = log.steps.iter().map(|s| s.units.iter().map(|u| u.melt_rate).sum::<f64>()).sum();
    let energy: f64 = log.steps.iter().map(|s| s.units.iter().map(|u| u.energy).sum::<f64>()).sum();
    let last = &log.steps.last().unwrap().units;
    let leftover: f64 = last.iter().map(|u| u.molten + u.solid).sum();
    println!("charged {charged:.3} melted {melted:.3} tapped {tapped:.3} leftover {leftover:.3}");
    println!("startups {} profit {:.1} energy {energy:.3}", log.startups(), log.cumulative_profit);
    // Per-6h profit breakdown
    for q in 0..4 {
        let p: f64 = log.steps[q*72..(q+1)*72].iter().map(|s| s.profit).sum();
        let avg_price: f64 = log.steps[q*72..(q+1)*72].iter().map(|s| s.price).sum::<f64>() / 72.0;
        println!("  quarter {q}: profit {p:.1} avg_price {avg_price:.1}");
    }
    // Stage-flag waste diagnostics.
    let mut idle_on = 0usize;
    let mut slow_melt = 0usize;
    let mut melt_steps = 0usize;
    let mut melt_energy = 0.0;
    for s in &log.steps {
        for u in &s.units {
            if u.on && !u.melting && u.tap_rate < 1e-12 { idle_on += 1; }
            if u.melting {
                melt_steps += 1;
                melt_energy += u.energy;
                if u.melt_rate < 1.0/15.0 - 1e-9 { slow_melt += 1; }
            }
        }
    }
    println!("idle-on steps {idle_on} | melt steps {melt_steps} (slow {slow_melt}) melt energy {melt_energy:.3}");
}
