use eaf_core::plant::presets;
use eaf_core::prices::{fit_bucketizer, synth_prices, SynthProfile};
use eaf_core::qlearn::*;

fn main() {
    let plant = presets::homogeneous_three();
    let (dap, _) = synth_prices(7, 120, &SynthProfile::default());
    let (dap_train, _) = dap.split_days(0.5);
    let bucketizer = fit_bucketizer(&dap_train).unwrap();
    let mut config = RLConfig::with_uniform_kappa(3, 16.0, 7);
    config.episodes = 2000;
    let (table, _) = train(&plant, &dap_train, &bucketizer, &config).unwrap();

    // Chain of mid-cycle states for unit 0 at cheap bucket z=1.
    for tau0 in [16u16, 15, 12, 8, 4, 2, 1] {
        let s = EnvState { bucket: 1, tau: vec![tau0, 0, 0] };
        let idx = s.index();
        println!("tau {tau0:>2}: Q(.,000)={:+8.3} v{:<6} Q(.,010)={:+8.3} v{}",
            table.value(idx, 0), table.visits(idx, 0),
            table.value(idx, 0b010), table.visits(idx, 0b010));
    }
    // And bucket z=0 (falling cheap) and z=4..
    for z in [0usize, 2, 4, 7] {
        let s = EnvState { bucket: z, tau: vec![0, 0, 0] };
        println!("z={z} idle: Q0={:+.3} (v{}) Qstart0={:+.3} (v{})",
            table.value(s.index(), 0), table.visits(s.index(), 0),
            table.value(s.index(), 1), table.visits(s.index(), 1));
    }
}
