//! Experiment runner for the furnace scheduling toolkit.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use eaf_core::config::{load_experiment, resolve_plant, ExperimentConfig, PriceSource};
use eaf_core::dispatch::RunSummary;
use eaf_core::experiment::{prepare_data, run_compare, run_kappa_sweep};
use eaf_core::milp::{build_window, idle_boundary, mps, WindowOptions};
use eaf_core::plant::validate_plant;
use eaf_core::prices::{synth_prices, write_price_csv, SynthProfile};
use eaf_core::qlearn::{evaluate, train, EvalOptions, QTable, RLConfig};
use eaf_core::rolling::{run_rolling, RollingConfig};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "eaf-bench",
    about = "Benchmark furnace dispatch policies on 5-minute electricity prices",
    version
)]
struct Cli {
    /// Experiment configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and data files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a plant configuration against every type invariant.
    Validate {
        /// Plant reference: a file path or builtin:{homogeneous3,heterogeneous3}.
        plant: String,
    },
    /// Generate synthetic day-ahead and real-time price files.
    SynthPrices {
        #[arg(long, default_value_t = 120)]
        days: usize,
    },
    /// Run the fixed-cycle baseline on the test split.
    SimulateBaseline,
    /// Train the Q-learning dispatcher and save the Q-table and TD trace.
    TrainQl,
    /// Evaluate a saved Q-table on the test split.
    EvalQl {
        /// Q-table file produced by train-ql.
        #[arg(long)]
        qtable: PathBuf,
    },
    /// Run the rolling-horizon MILP on the test split.
    RunMilp,
    /// Run all three policies on shared data and emit comparison reports.
    Compare,
    /// Train and evaluate once per smoothing factor.
    SweepKappa {
        /// Comma-separated smoothing factors, e.g. 11,12,13.
        #[arg(long, value_delimiter = ',', default_values_t = vec![11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0, 20.0])]
        kappas: Vec<f64>,
    },
    /// Export one scheduling window as a fixed-format MPS file.
    ExportMps {
        /// First step of the window within the test split.
        #[arg(long, default_value_t = 0)]
        window_start: usize,
        /// Window length in steps.
        #[arg(long)]
        horizon: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_experiment(path)
            .with_context(|| format!("reading experiment config {}", path.display()))?,
        None => ExperimentConfig::synthetic_default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        if let PriceSource::Synthetic { days, .. } = cfg.prices {
            cfg.prices = PriceSource::Synthetic { seed, days };
        }
    }
    Ok(cfg)
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn rl_from(cfg: &ExperimentConfig, train_days: usize) -> RLConfig {
    RLConfig {
        learning_rate: cfg.learning_rate,
        discount: cfg.discount,
        epsilon_start: cfg.epsilon_start,
        epsilon_decay: cfg.epsilon_decay,
        epsilon_min: cfg.epsilon_min,
        episodes: cfg.episodes.unwrap_or(600 * train_days.max(1)),
        kappa: vec![cfg.kappa; cfg.plant.units.len()],
        seed: cfg.seed,
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Validate { plant } => {
            let plant = resolve_plant(plant)?;
            let violations = validate_plant(&plant);
            if violations.is_empty() {
                println!("plant ok: {} units", plant.units.len());
                Ok(())
            } else {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                bail!("{} violation(s) found", violations.len());
            }
        }
        Command::SynthPrices { days } => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let seed = match cfg.prices {
                PriceSource::Synthetic { seed, .. } => seed,
                _ => cfg.seed,
            };
            let (dap, rtp) = synth_prices(seed, *days, &SynthProfile::default());
            write_price_csv(&dap, &cli.out.join("dap.csv"))?;
            write_price_csv(&rtp, &cli.out.join("rtp.csv"))?;
            println!(
                "wrote {} days ({} steps) to {}",
                days,
                dap.len(),
                cli.out.display()
            );
            Ok(())
        }
        Command::SimulateBaseline => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let data = prepare_data(&cfg)?;
            let spec = eaf_core::baseline::FixedCycleSpec::default_for(&cfg.plant);
            let log = eaf_core::baseline::run_fixed(&cfg.plant, &data.rtp_test, &spec)?;
            log.write_csv(&cli.out.join("dispatch_baseline.csv"))?;
            let summary = RunSummary::from_log("baseline", &log);
            let mut buf = Vec::new();
            summary.write_text(&mut buf)?;
            std::fs::write(cli.out.join("summary_baseline.txt"), &buf)?;
            println!("baseline profit: {:.2}", log.cumulative_profit);
            Ok(())
        }
        Command::TrainQl => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let data = prepare_data(&cfg)?;
            let rl = rl_from(&cfg, data.dap_train.len() / 288);
            let (table, trace) = train(&cfg.plant, &data.dap_train, &data.bucketizer, &rl)?;
            table.save(&cli.out.join("qtable.txt"))?;
            let mut csv = String::from("step,td_error\n");
            for (i, v) in trace.iter().enumerate() {
                csv.push_str(&format!("{i},{v:.9}\n"));
            }
            std::fs::write(cli.out.join("td_trace.csv"), csv)?;
            eaf_core::experiment::emit_convergence(&trace, &cli.out.join("td_convergence.csv"))?;
            println!(
                "trained {} episodes; {} visited entries",
                rl.episodes,
                table.visited_entries()
            );
            Ok(())
        }
        Command::EvalQl { qtable } => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let data = prepare_data(&cfg)?;
            let table = QTable::load(qtable)?;
            let report = evaluate(
                &table,
                &data.dap_test,
                &data.rtp_test,
                &data.bucketizer,
                &cfg.plant,
                &EvalOptions::default(),
            )?;
            report
                .log
                .write_csv(&cli.out.join("dispatch_qlearning.csv"))?;
            println!(
                "qlearning profit: {:.2} (startups {}, utilization {:.3})",
                report.profit, report.startups, report.utilization
            );
            Ok(())
        }
        Command::RunMilp => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let data = prepare_data(&cfg)?;
            let rolling = RollingConfig {
                horizon: cfg.horizon,
                step: cfg.step,
                rel_gap: cfg.mip_gap,
                node_limit: cfg.node_limit,
                checkpoint_dir: Some(cli.out.join("checkpoints")),
            };
            let result = run_rolling(&cfg.plant, &data.rtp_test, &rolling)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            result.log.write_csv(&cli.out.join("dispatch_milp.csv"))?;
            println!(
                "milp profit: {:.2} over {} windows ({} nodes)",
                result.log.cumulative_profit, result.windows, result.nodes_total
            );
            Ok(())
        }
        Command::Compare => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let report = run_compare(&cfg, Some(&cli.out))?;
            let (base, ql, milp) = report.profits();
            println!("baseline:  {base:>12.2}");
            println!("qlearning: {ql:>12.2}");
            println!("milp:      {milp:>12.2}");
            println!("reports in {}", cli.out.display());
            Ok(())
        }
        Command::SweepKappa { kappas } => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let rows = run_kappa_sweep(&cfg, kappas, Some(&cli.out))?;
            println!("kappa  profit      startups");
            for (k, p, s) in rows {
                println!("{k:<6} {p:>11.2} {s:>8}");
            }
            Ok(())
        }
        Command::ExportMps {
            window_start,
            horizon,
        } => {
            let cfg = load_config(&cli)?;
            ensure_out(&cli.out)?;
            let data = prepare_data(&cfg)?;
            let h = horizon.unwrap_or(cfg.horizon);
            let end = window_start + h;
            if end > data.rtp_test.len() {
                bail!(
                    "window [{window_start}, {end}) exceeds the test split of {} steps",
                    data.rtp_test.len()
                );
            }
            let prices = &data.rtp_test.values[*window_start..end];
            let window = build_window(
                &cfg.plant,
                prices,
                &idle_boundary(cfg.plant.units.len()),
                &WindowOptions::default(),
            )?;
            let path = cli.out.join(format!("window_{window_start}_{h}.mps"));
            mps::export_mps(&window.model, "EAFWIN", &path)?;
            let mut dump = Vec::new();
            mps::write_debug_dump(&window.model, &mut dump)?;
            std::fs::write(cli.out.join(format!("window_{window_start}_{h}.txt")), dump)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
