//! Per-step dispatch records shared by every policy, with profit replay
//! and CSV export.

use crate::plant::{step_profit, FurnaceParams, FurnaceState, UnitFlows};
use std::io::Write;
use std::path::Path;

/// One unit's record for one step: the stage decision, realized flows, and
/// the stock snapshot concurrent with the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitRecord {
    pub on: bool,
    pub melting: bool,
    pub startup: bool,
    pub tap_rate: f64,
    pub melt_rate: f64,
    pub input: f64,
    pub energy: f64,
    pub molten: f64,
    pub solid: f64,
}

impl UnitRecord {
    pub fn idle_with_state(state: &FurnaceState) -> Self {
        Self {
            on: false,
            melting: false,
            startup: false,
            tap_rate: 0.0,
            melt_rate: 0.0,
            input: 0.0,
            energy: 0.0,
            molten: state.molten,
            solid: state.solid,
        }
    }

    pub fn flows(&self) -> UnitFlows {
        UnitFlows {
            startup: self.startup,
            input: self.input,
            tap_rate: self.tap_rate,
            energy: self.energy,
        }
    }
}

/// One step's record across all units.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Settlement price used for this step ($/MWh).
    pub price: f64,
    /// Plant-level profit of the step ($).
    pub profit: f64,
    pub units: Vec<UnitRecord>,
}

/// Full dispatch trajectory of one policy run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DispatchLog {
    pub steps: Vec<StepRecord>,
    pub cumulative_profit: f64,
}

impl DispatchLog {
    pub fn unit_count(&self) -> usize {
        self.steps.first().map(|s| s.units.len()).unwrap_or(0)
    }

    pub fn push(&mut self, step: StepRecord) {
        self.cumulative_profit += step.profit;
        self.steps.push(step);
    }

    /// Total startups across the run.
    pub fn startups(&self) -> u64 {
        self.steps
            .iter()
            .map(|s| s.units.iter().filter(|u| u.startup).count() as u64)
            .sum()
    }

    /// Active (on or melting) unit-steps over total unit-steps.
    pub fn utilization(&self) -> f64 {
        let total: usize = self.steps.len() * self.unit_count();
        if total == 0 {
            return 0.0;
        }
        let active: usize = self
            .steps
            .iter()
            .map(|s| s.units.iter().filter(|u| u.on || u.melting).count())
            .sum();
        active as f64 / total as f64
    }

    /// Variance of daily profit (population variance over whole days).
    pub fn daily_profit_variance(&self) -> f64 {
        let per_day = crate::prices::STEPS_PER_DAY;
        let days = self.steps.len() / per_day;
        if days == 0 {
            return 0.0;
        }
        let daily: Vec<f64> = (0..days)
            .map(|d| {
                self.steps[d * per_day..(d + 1) * per_day]
                    .iter()
                    .map(|s| s.profit)
                    .sum()
            })
            .collect();
        let mean = daily.iter().sum::<f64>() / days as f64;
        daily.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / days as f64
    }

    /// Recompute every step's profit from the recorded flows and price and
    /// return the largest discrepancy against the stored profit column.
    pub fn replay_profit_discrepancy(&self, units: &[FurnaceParams]) -> f64 {
        let mut worst = 0.0_f64;
        let mut cumulative = 0.0;
        for step in &self.steps {
            let flows: Vec<UnitFlows> = step.units.iter().map(UnitRecord::flows).collect();
            let recomputed = step_profit(&flows, step.price, units);
            worst = worst.max((recomputed - step.profit).abs());
            cumulative += recomputed;
        }
        worst.max((cumulative - self.cumulative_profit).abs())
    }

    /// Cumulative profit after each step.
    pub fn cumulative_series(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.steps
            .iter()
            .map(|s| {
                acc += s.profit;
                acc
            })
            .collect()
    }

    /// Export as a comma-separated table, one row per (step, unit); the
    /// step-level price and profit repeat on each unit row.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "step,unit,on,melting,startup,tap_rate,melt_rate,input,energy,molten,solid,price,step_profit"
        )?;
        for (t, step) in self.steps.iter().enumerate() {
            for (i, u) in step.units.iter().enumerate() {
                writeln!(
                    out,
                    "{t},{i},{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.6},{:.6}",
                    u.on as u8,
                    u.melting as u8,
                    u.startup as u8,
                    u.tap_rate,
                    u.melt_rate,
                    u.input,
                    u.energy,
                    u.molten,
                    u.solid,
                    step.price,
                    step.profit
                )?;
            }
        }
        Ok(())
    }
}

/// Run summary exported next to the dispatch table.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub policy: String,
    pub cumulative_profit: f64,
    pub startups: u64,
    pub utilization: f64,
    pub daily_profit_variance: f64,
}

impl RunSummary {
    pub fn from_log(policy: &str, log: &DispatchLog) -> Self {
        Self {
            policy: policy.to_string(),
            cumulative_profit: log.cumulative_profit,
            startups: log.startups(),
            utilization: log.utilization(),
            daily_profit_variance: log.daily_profit_variance(),
        }
    }

    pub fn write_text(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "policy = {}", self.policy)?;
        writeln!(out, "cumulative_profit = {:.6}", self.cumulative_profit)?;
        writeln!(out, "startups = {}", self.startups)?;
        writeln!(out, "utilization = {:.6}", self.utilization)?;
        writeln!(
            out,
            "daily_profit_variance = {:.6}",
            self.daily_profit_variance
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::presets;

    #[test]
    fn replay_matches_by_construction() {
        let params = vec![presets::standard_unit()];
        let mut log = DispatchLog::default();
        let state = FurnaceState::default();
        let mut rec = UnitRecord::idle_with_state(&state);
        rec.on = true;
        rec.energy = 0.0033;
        rec.tap_rate = 0.05;
        let flows = rec.flows();
        let profit = step_profit(&[flows], 42.0, &params);
        log.push(StepRecord {
            price: 42.0,
            profit,
            units: vec![rec],
        });
        assert!(log.replay_profit_discrepancy(&params) < 1e-12);
        assert_eq!(log.startups(), 0);
        assert!((log.utilization() - 1.0).abs() < 1e-12);
    }
}
