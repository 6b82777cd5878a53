use eaf_core::plant::presets;
use eaf_core::prices::{synth_prices, SynthProfile};

// Clairvoyant DP over fixed physical cycles: 15 melt steps at full load,
// one settle step at base, one idle gap step => pitch 17. Revenue timing
// does not matter (untimed margin), so value = margin - delta - energy cost.
fn physical_dp(prices: &[f64], n: usize, cap: f64) -> f64 {
    const L: usize = 17; // occupancy incl. settle; +1 gap handled via tau
    let full = 0.04_f64;
    let base = 0.0033_f64;
    let margin = 68.0 - 50.0;
    let tau_states = L + 2; // 0 idle, 1..=L+1 remaining (incl. gap step)
    let combos = tau_states.pow(n as u32);
    let horizon = prices.len();

    let energy_at = |pos: usize| -> f64 {
        if pos < 15 { full } else if pos == 15 { base } else { 0.0 } // pos 16 = gap
    };
    let decode = |mut idx: usize, tau: &mut [usize]| {
        for t in tau.iter_mut() { *t = idx % tau_states; idx /= tau_states; }
    };
    let encode = |tau: &[usize]| -> usize {
        let mut idx = 0; for &t in tau.iter().rev() { idx = idx * tau_states + t; } idx
    };

    let mut next_v = vec![0.0f64; combos];
    let mut v = vec![0.0f64; combos];
    let mut tau = vec![0usize; n];
    for t in (0..horizon).rev() {
        for combo in 0..combos {
            decode(combo, &mut tau);
            let mut best = f64::NEG_INFINITY;
            for action in 0..(1u64 << n) {
                let mut ok = true;
                for i in 0..n { if action & (1 << i) != 0 && tau[i] != 0 { ok = false; } }
                if !ok { continue; }
                if action != 0 && t + L > horizon { continue; }
                let mut stepped = tau.clone();
                for i in 0..n { if action & (1 << i) != 0 { stepped[i] = L + 1; } }
                // cap + reward this step
                let mut load = 0.0; let mut reward = 0.0;
                for i in 0..n {
                    if stepped[i] > 0 {
                        let pos = L + 1 - stepped[i];
                        load += energy_at(pos);
                        reward -= prices[t] * energy_at(pos);
                        if pos == 0 { reward += margin; }
                    }
                }
                if load > cap + 1e-9 { continue; }
                let mut nt = stepped.clone();
                for s in nt.iter_mut() { if *s > 0 { *s -= 1; } }
                let cand = reward + next_v[encode(&nt)];
                if cand > best { best = cand; }
            }
            v[combo] = best;
        }
        std::mem::swap(&mut v, &mut next_v);
    }
    next_v[0]
}

fn main() {
    let plant = presets::homogeneous_three();
    let (_, rtp) = synth_prices(7, 120, &SynthProfile::default());
    let (_, rtp_test) = rtp.split_days(0.5);
    let days = 14usize;
    let rtp_t = rtp_test.slice(0, days * 288);
    let t0 = std::time::Instant::now();
    let ceiling = physical_dp(&rtp_t.values, plant.units.len(), plant.power_cap);
    println!("physical-cycle clairvoyant ceiling over {days} days: {ceiling:.1} ({:?})", t0.elapsed());
}
