//! Experiment orchestration: run the three policy families on shared data
//! and emit comparison reports, sensitivity sweeps, and diagnostics as
//! plain data files.
//!
//! Reports are deterministic for a fixed seed; wall-clock timings go to a
//! separate `timings.txt` that is excluded from that guarantee.

use crate::baseline::{run_fixed, FixedCycleSpec};
use crate::config::{ExperimentConfig, PriceSource};
use crate::dispatch::{DispatchLog, RunSummary};
use crate::plant::PlantConfig;
use crate::prices::{
    align_series, fit_bucketizer, load_price_csv, synth_prices, Market, PriceBucketizer,
    PriceSeries, SynthProfile, STEPS_PER_DAY,
};
use crate::qlearn::{evaluate, td_trace_stats, train, EvalOptions, QTable, RLConfig};
use crate::rolling::{run_rolling, RollingConfig};
use std::io::Write;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Price(#[from] crate::prices::PriceError),
    #[error(transparent)]
    Ql(#[from] crate::qlearn::QlError),
    #[error(transparent)]
    Rolling(#[from] crate::rolling::RollingError),
    #[error(transparent)]
    Baseline(#[from] crate::baseline::BaselineError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("plant configuration invalid:\n{0}")]
    InvalidPlant(String),
    #[error("test split is empty; supply more data or lower train_fraction")]
    EmptyTestSplit,
    #[error("i/o error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn write_file(path: &Path, content: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, content).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Aligned price data split into train and test ranges.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dap_train: PriceSeries,
    pub dap_test: PriceSeries,
    pub rtp_test: PriceSeries,
    pub bucketizer: PriceBucketizer,
}

/// Load or synthesize prices and split chronologically; inputs spanning
/// two years or more split at the first year, mirroring a train-one-year /
/// test-one-year protocol.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, ExperimentError> {
    let (dap, rtp) = match &cfg.prices {
        PriceSource::Synthetic { seed, days } => {
            synth_prices(*seed, *days, &SynthProfile::default())
        }
        PriceSource::Files { dap, rtp } => {
            let (d, _) = load_price_csv(dap, Market::DayAhead)?;
            let (r, _) = load_price_csv(rtp, Market::RealTime)?;
            align_series(&d, &r)?
        }
    };
    let days = dap.len() / STEPS_PER_DAY;
    let fraction = if days >= 730 {
        365.0 / days as f64
    } else {
        cfg.train_fraction
    };
    let (dap_train, dap_test) = dap.split_days(fraction);
    let (_, rtp_test) = rtp.split_days(fraction);
    if dap_test.is_empty() {
        return Err(ExperimentError::EmptyTestSplit);
    }
    let bucketizer = fit_bucketizer(&dap_train)?;
    Ok(PreparedData {
        dap_train,
        dap_test,
        rtp_test,
        bucketizer,
    })
}

fn rl_config(cfg: &ExperimentConfig, data: &PreparedData) -> RLConfig {
    let train_days = data.dap_train.len() / STEPS_PER_DAY;
    RLConfig {
        learning_rate: cfg.learning_rate,
        discount: cfg.discount,
        epsilon_start: cfg.epsilon_start,
        epsilon_decay: cfg.epsilon_decay,
        epsilon_min: cfg.epsilon_min,
        // One pass of 600 episodes per training day matches the original
        // protocol's data volume under day-long episodes.
        episodes: cfg.episodes.unwrap_or(600 * train_days.max(1)),
        kappa: vec![cfg.kappa; cfg.plant.units.len()],
        seed: cfg.seed,
    }
}

fn rolling_config(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> RollingConfig {
    RollingConfig {
        horizon: cfg.horizon,
        step: cfg.step,
        rel_gap: cfg.mip_gap,
        node_limit: cfg.node_limit,
        checkpoint_dir: out_dir.map(|d| d.join("checkpoints")),
    }
}

/// One policy's results within a comparison.
#[derive(Debug, Clone)]
pub struct PolicyResult {
    pub name: &'static str,
    pub log: DispatchLog,
    pub wall: std::time::Duration,
}

#[derive(Debug)]
pub struct CompareReport {
    pub baseline: PolicyResult,
    pub qlearning: PolicyResult,
    pub milp: PolicyResult,
    pub qtable: QTable,
    pub td_trace: Vec<f64>,
    pub milp_warnings: Vec<String>,
}

impl CompareReport {
    pub fn profits(&self) -> (f64, f64, f64) {
        (
            self.baseline.log.cumulative_profit,
            self.qlearning.log.cumulative_profit,
            self.milp.log.cumulative_profit,
        )
    }
}

fn validated(plant: &PlantConfig) -> Result<(), ExperimentError> {
    let violations = crate::plant::validate_plant(plant);
    if violations.is_empty() {
        Ok(())
    } else {
        let list = violations
            .iter()
            .map(|v| format!("  - {v}"))
            .collect::<Vec<_>>()
            .join("\n");
        Err(ExperimentError::InvalidPlant(list))
    }
}

/// Run the fixed baseline, the Q-learning dispatcher (train on the train
/// split, evaluate on the test split), and the rolling MILP on the same
/// test data. Emits dispatch tables, cumulative series, a summary, the
/// Q-table, and the TD trace when `out_dir` is given.
pub fn run_compare(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<CompareReport, ExperimentError> {
    validated(&cfg.plant)?;
    let data = prepare_data(cfg)?;

    let t0 = Instant::now();
    let rl = rl_config(cfg, &data);
    let (qtable, td_trace) = train(&cfg.plant, &data.dap_train, &data.bucketizer, &rl)?;
    let ql_eval = evaluate(
        &qtable,
        &data.dap_test,
        &data.rtp_test,
        &data.bucketizer,
        &cfg.plant,
        &EvalOptions::default(),
    )?;
    let qlearning = PolicyResult {
        name: "qlearning",
        log: ql_eval.log,
        wall: t0.elapsed(),
    };

    let t0 = Instant::now();
    let spec = FixedCycleSpec::default_for(&cfg.plant);
    let baseline_log = run_fixed(&cfg.plant, &data.rtp_test, &spec)?;
    let baseline = PolicyResult {
        name: "baseline",
        log: baseline_log,
        wall: t0.elapsed(),
    };

    let t0 = Instant::now();
    let rolled = run_rolling(&cfg.plant, &data.rtp_test, &rolling_config(cfg, out_dir))?;
    let milp = PolicyResult {
        name: "milp",
        log: rolled.log,
        wall: t0.elapsed(),
    };

    let report = CompareReport {
        baseline,
        qlearning,
        milp,
        qtable,
        td_trace,
        milp_warnings: rolled.warnings,
    };
    if let Some(dir) = out_dir {
        write_compare_outputs(&report, &cfg.plant, dir)?;
    }
    Ok(report)
}

fn write_compare_outputs(
    report: &CompareReport,
    plant: &PlantConfig,
    dir: &Path,
) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let policies = [&report.baseline, &report.qlearning, &report.milp];
    for p in policies {
        p.log
            .write_csv(&dir.join(format!("dispatch_{}.csv", p.name)))
            .map_err(|source| ExperimentError::Io {
                path: format!("dispatch_{}.csv", p.name),
                source,
            })?;
    }

    // Cumulative profit series, one column per policy.
    let series: Vec<Vec<f64>> = policies.iter().map(|p| p.log.cumulative_series()).collect();
    let steps = series.iter().map(Vec::len).max().unwrap_or(0);
    let mut cumulative = String::from("step,baseline,qlearning,milp\n");
    for t in 0..steps {
        let cell = |s: &Vec<f64>| {
            s.get(t)
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default()
        };
        cumulative.push_str(&format!(
            "{t},{},{},{}\n",
            cell(&series[0]),
            cell(&series[1]),
            cell(&series[2])
        ));
    }
    write_file(&dir.join("cumulative.csv"), &cumulative)?;

    // Summary: per-policy metrics plus uplift and share lines.
    let mut summary = Vec::new();
    for p in policies {
        RunSummary::from_log(p.name, &p.log)
            .write_text(&mut summary)
            .map_err(|source| ExperimentError::Io {
                path: "summary.txt".into(),
                source,
            })?;
        let discrepancy = p.log.replay_profit_discrepancy(&plant.units);
        summary
            .write_fmt(format_args!("replay_discrepancy = {discrepancy:.3e}\n\n"))
            .ok();
    }
    let (base, ql, milp) = report.profits();
    if base.abs() > 1e-9 {
        summary
            .write_fmt(format_args!(
                "uplift_qlearning_vs_baseline = {:.4}\nuplift_milp_vs_baseline = {:.4}\n",
                (ql - base) / base.abs(),
                (milp - base) / base.abs()
            ))
            .ok();
    }
    if milp.abs() > 1e-9 {
        summary
            .write_fmt(format_args!("share_qlearning_of_milp = {:.4}\n", ql / milp))
            .ok();
    }
    for w in &report.milp_warnings {
        summary.write_fmt(format_args!("warning = {w}\n")).ok();
    }
    write_file(
        &dir.join("summary.txt"),
        std::str::from_utf8(&summary).unwrap_or(""),
    )?;

    report
        .qtable
        .save(&dir.join("qtable.txt"))
        .map_err(ExperimentError::Ql)?;
    let trace_csv: String = std::iter::once("step,td_error\n".to_string())
        .chain(
            report
                .td_trace
                .iter()
                .enumerate()
                .map(|(i, v)| format!("{i},{v:.9}\n")),
        )
        .collect();
    write_file(&dir.join("td_trace.csv"), &trace_csv)?;
    emit_convergence(&report.td_trace, &dir.join("td_convergence.csv"))?;

    let timings = format!(
        "baseline_ms = {}\nqlearning_ms = {}\nmilp_ms = {}\n",
        report.baseline.wall.as_millis(),
        report.qlearning.wall.as_millis(),
        report.milp.wall.as_millis()
    );
    write_file(&dir.join("timings.txt"), &timings)?;
    Ok(())
}

/// Train and evaluate once per smoothing factor; returns (kappa, profit,
/// startups) rows and optionally writes `kappa_sweep.csv`.
pub fn run_kappa_sweep(
    cfg: &ExperimentConfig,
    kappas: &[f64],
    out_dir: Option<&Path>,
) -> Result<Vec<(f64, f64, u64)>, ExperimentError> {
    validated(&cfg.plant)?;
    let data = prepare_data(cfg)?;
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let mut rl = rl_config(cfg, &data);
        rl.kappa = vec![kappa; cfg.plant.units.len()];
        let (table, _) = train(&cfg.plant, &data.dap_train, &data.bucketizer, &rl)?;
        let eval = evaluate(
            &table,
            &data.dap_test,
            &data.rtp_test,
            &data.bucketizer,
            &cfg.plant,
            &EvalOptions::default(),
        )?;
        rows.push((kappa, eval.profit, eval.startups));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut csv = String::from("kappa,profit,startups\n");
        for (k, p, s) in &rows {
            csv.push_str(&format!("{k},{p:.6},{s}\n"));
        }
        write_file(&dir.join("kappa_sweep.csv"), &csv)?;
    }
    Ok(rows)
}

/// Write the TD convergence diagnostic: the centered rolling median of
/// |TD error| with a window of nine steps.
pub fn emit_convergence(trace: &[f64], path: &Path) -> Result<(), ExperimentError> {
    let stats = td_trace_stats(trace, 9)?;
    let mut csv = String::from("step,rolling_median_abs_td\n");
    for (i, v) in stats.iter().enumerate() {
        csv.push_str(&format!("{i},{v:.9}\n"));
    }
    write_file(path, &csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.prices = PriceSource::Synthetic { seed: 3, days: 9 };
        cfg.train_fraction = 0.78; // 7 train days, 2 test days
        cfg.episodes = Some(400);
        cfg.node_limit = 20;
        cfg.horizon = 24;
        cfg
    }

    #[test]
    fn compare_runs_and_reports_are_deterministic() {
        let cfg = tiny_config();
        let dir = std::env::temp_dir().join("eaf_compare_test");
        let _ = std::fs::remove_dir_all(&dir);
        let r1 = run_compare(&cfg, Some(&dir)).unwrap();
        let summary1 = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
        let r2 = run_compare(&cfg, None).unwrap();
        assert_eq!(
            r1.qlearning.log.cumulative_profit,
            r2.qlearning.log.cumulative_profit
        );
        assert_eq!(r1.milp.log.cumulative_profit, r2.milp.log.cumulative_profit);
        assert!(summary1.contains("policy = baseline"));
        assert!(dir.join("dispatch_milp.csv").exists());
        assert!(dir.join("td_convergence.csv").exists());
    }

    #[test]
    fn kappa_sweep_rows_are_complete() {
        let cfg = tiny_config();
        let rows = run_kappa_sweep(&cfg, &[11.0, 16.0], None).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, 11.0);
    }

    #[test]
    fn empty_test_split_is_reported() {
        let mut cfg = tiny_config();
        cfg.train_fraction = 1.0;
        assert!(matches!(
            run_compare(&cfg, None),
            Err(ExperimentError::EmptyTestSplit)
        ));
    }
}
