use eaf_core::baseline::{run_fixed, FixedCycleSpec};
use eaf_core::oracle::template_dp;
use eaf_core::plant::presets;
use eaf_core::prices::{fit_bucketizer, synth_prices, SynthProfile};
use eaf_core::qlearn::{evaluate, train, EvalOptions, RLConfig};
use eaf_core::rolling::{run_rolling, RollingConfig};
use std::time::Instant;

fn main() {
    let plant = presets::homogeneous_three();
    let (dap, rtp) = synth_prices(7, 120, &SynthProfile::default());
    let (dap_train, dap_test) = dap.split_days(0.5);
    let (_, rtp_test) = rtp.split_days(0.5);
    let days = 14usize;
    let dap_t = dap_test.slice(0, days * 288);
    let rtp_t = rtp_test.slice(0, days * 288);

    let bucketizer = fit_bucketizer(&dap_train).unwrap();
    let mut config = RLConfig::with_uniform_kappa(3, 16.0, 7);
    config.episodes = 600 * (dap_train.len() / 288);
    let t0 = Instant::now();
    let (table, _) = train(&plant, &dap_train, &bucketizer, &config).unwrap();
    let ql = evaluate(&table, &dap_t, &rtp_t, &bucketizer, &plant, &EvalOptions::default()).unwrap();
    println!("QL:        {:>9.1}  (starts {}, train+eval {:?})", ql.profit, ql.startups, t0.elapsed());

    let t0 = Instant::now();
    let base = run_fixed(&plant, &rtp_t, &FixedCycleSpec::default_for(&plant)).unwrap();
    println!("baseline:  {:>9.1}  (starts {}, {:?})", base.cumulative_profit, base.startups(), t0.elapsed());

    let t0 = Instant::now();
    let dp = template_dp(&plant, &rtp_t.values);
    println!("templateDP:{:>9.1}  ({:?})", dp, t0.elapsed());

    let t0 = Instant::now();
    let cfg = RollingConfig { horizon: 48, step: 12, rel_gap: 1e-3, node_limit: 60, checkpoint_dir: None };
    let milp = run_rolling(&plant, &rtp_t, &cfg).unwrap();
    println!("MILP:      {:>9.1}  (starts {}, {:?}, at-limit {}/{})",
        milp.log.cumulative_profit, milp.log.startups(), t0.elapsed(), milp.windows_at_node_limit, milp.windows);
}
