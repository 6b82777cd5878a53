//! Non-adaptive reference policies: fixed-cycle operation with phase
//! offsets and the uncoordinated skip heuristic under the shared cap.

use crate::dispatch::DispatchLog;
use crate::plant::{FurnaceState, PlantConfig};
use crate::prices::PriceSeries;
use crate::template::{plant_templates, position, projected_load, template_step, CYCLE_STEPS};
use thiserror::Error;

/// Fixed duty cycle of one unit: the nominal melt/tap template plus an
/// idle cooldown and a phase offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCycleSpec {
    pub melt_steps: usize,
    pub tap_steps: usize,
    pub stop_steps: usize,
    pub offset: usize,
}

impl UnitCycleSpec {
    pub fn period(&self) -> usize {
        self.melt_steps + self.tap_steps + self.stop_steps
    }
}

/// Fixed-cycle schedule across the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedCycleSpec {
    pub units: Vec<UnitCycleSpec>,
}

impl FixedCycleSpec {
    /// The default schedule mirrors the learning dispatcher's template
    /// (12 melt + 4 tap, no cooldown) with offsets staggering the first
    /// two units half a cycle apart; later units rely on the skip rule.
    pub fn default_for(plant: &PlantConfig) -> Self {
        let units = (0..plant.units.len())
            .map(|i| UnitCycleSpec {
                melt_steps: crate::template::MELT_PHASE_STEPS,
                tap_steps: crate::template::TAP_PHASE_STEPS,
                stop_steps: 0,
                offset: if i == 1 { 8 } else { 0 },
            })
            .collect();
        Self { units }
    }
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("spec covers {got} units, plant has {expected}")]
    UnitCountMismatch { got: usize, expected: usize },
    #[error("unit {unit}: melt and tap phases must be at least one step")]
    EmptyPhase { unit: usize },
    #[error("unit {unit}: offset {offset} not below the cycle period {period}")]
    OffsetTooLarge {
        unit: usize,
        offset: usize,
        period: usize,
    },
    #[error("unit {unit}: cycle phases {got} differ from the {expected}-step template")]
    UnsupportedCycle {
        unit: usize,
        got: usize,
        expected: usize,
    },
    #[error(transparent)]
    Plant(#[from] crate::plant::PlantError),
}

fn validate_spec(plant: &PlantConfig, spec: &FixedCycleSpec) -> Result<(), BaselineError> {
    if spec.units.len() != plant.units.len() {
        return Err(BaselineError::UnitCountMismatch {
            got: spec.units.len(),
            expected: plant.units.len(),
        });
    }
    for (i, u) in spec.units.iter().enumerate() {
        if u.melt_steps == 0 || u.tap_steps == 0 {
            return Err(BaselineError::EmptyPhase { unit: i });
        }
        if u.offset >= u.period() {
            return Err(BaselineError::OffsetTooLarge {
                unit: i,
                offset: u.offset,
                period: u.period(),
            });
        }
        // The stepping machinery is built around the shared melt/tap
        // template; cooldown and offset are free.
        if u.melt_steps + u.tap_steps != CYCLE_STEPS {
            return Err(BaselineError::UnsupportedCycle {
                unit: i,
                got: u.melt_steps + u.tap_steps,
                expected: CYCLE_STEPS,
            });
        }
    }
    Ok(())
}

/// Run the fixed-cycle policy over a price series. Units start a cycle
/// whenever their phase comes up, regardless of prices; a unit whose start
/// would push the projected load over the cap skips that cycle entirely
/// (lower unit indexes take priority), which is the uncoordinated
/// heuristic used for multi-unit comparisons.
pub fn run_fixed(
    plant: &PlantConfig,
    prices: &PriceSeries,
    spec: &FixedCycleSpec,
) -> Result<DispatchLog, BaselineError> {
    validate_spec(plant, spec)?;
    let n = plant.units.len();
    let templates = plant_templates(plant);
    let mut tau = vec![0u16; n];
    let mut states = vec![FurnaceState::default(); n];
    let mut log = DispatchLog::default();

    for t in 0..prices.len() {
        // Units due to start this step, in priority order.
        for i in 0..n {
            let u = &spec.units[i];
            if tau[i] != 0 || t % u.period() != u.offset % u.period() {
                continue;
            }
            // Cycles must complete within the horizon to settle cleanly;
            // a truncated trailing cycle is allowed and simply truncates.
            let starts = 1u64 << i;
            if starts_fit(&templates, &tau, starts, plant.power_cap) {
                tau[i] = CYCLE_STEPS as u16;
            }
        }
        let positions: Vec<Option<usize>> = tau.iter().map(|&s| position(s)).collect();
        let record = template_step(&mut states, &positions, &templates, plant, prices.values[t])?;
        log.push(record);
        for slot in tau.iter_mut() {
            if *slot > 0 {
                *slot -= 1;
            }
        }
    }
    Ok(log)
}

fn starts_fit(
    templates: &[crate::template::CycleTemplate],
    tau: &[u16],
    starts: u64,
    cap: f64,
) -> bool {
    for offset in 0..CYCLE_STEPS {
        if projected_load(templates, tau, starts, offset) > cap + 1e-9 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::presets;
    use crate::prices::{synth_epoch, Market};

    fn series(values: Vec<f64>) -> PriceSeries {
        PriceSeries {
            start: synth_epoch(),
            values,
            market: Market::RealTime,
        }
    }

    #[test]
    fn single_unit_cycle_profit_at_zero_price() {
        let mut plant = presets::homogeneous_three();
        plant.units.truncate(1);
        let spec = FixedCycleSpec {
            units: vec![UnitCycleSpec {
                melt_steps: 12,
                tap_steps: 4,
                stop_steps: 0,
                offset: 0,
            }],
        };
        // Exactly two cycles fit in 32 steps (the policy would charge a
        // third batch at t = 32 regardless of profitability).
        let log = run_fixed(&plant, &series(vec![0.0; 32]), &spec).unwrap();
        assert_eq!(log.startups(), 2);
        assert!(
            (log.cumulative_profit - 36.0).abs() < 1e-9,
            "profit {}",
            log.cumulative_profit
        );
        assert!(log.replay_profit_discrepancy(&plant.units) < 1e-12);
    }

    #[test]
    fn third_unit_perpetually_skips_under_cap() {
        let plant = presets::homogeneous_three();
        let spec = FixedCycleSpec {
            units: (0..3)
                .map(|_| UnitCycleSpec {
                    melt_steps: 12,
                    tap_steps: 4,
                    stop_steps: 0,
                    offset: 0,
                })
                .collect(),
        };
        let log = run_fixed(&plant, &series(vec![40.0; 16 * 6]), &spec).unwrap();
        // Units 0 and 1 run every cycle; unit 2 never gets under the cap.
        for step in &log.steps {
            assert!(!step.units[2].on && !step.units[2].startup);
        }
        assert_eq!(log.startups(), 12);
    }

    #[test]
    fn price_agnostic_decisions() {
        let plant = presets::homogeneous_three();
        let spec = FixedCycleSpec::default_for(&plant);
        let rising: Vec<f64> = (0..96).map(|t| t as f64).collect();
        let mut falling = rising.clone();
        falling.reverse();
        let a = run_fixed(&plant, &series(rising), &spec).unwrap();
        let b = run_fixed(&plant, &series(falling), &spec).unwrap();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            for (ua, ub) in sa.units.iter().zip(&sb.units) {
                assert_eq!(ua.on, ub.on);
                assert_eq!(ua.melting, ub.melting);
                assert_eq!(ua.startup, ub.startup);
            }
        }
        assert!((a.cumulative_profit - b.cumulative_profit).abs() > 1e-6);
    }

    #[test]
    fn cap_respected_with_offsets() {
        let plant = presets::homogeneous_three();
        let spec = FixedCycleSpec::default_for(&plant);
        let log = run_fixed(&plant, &series(vec![25.0; 288]), &spec).unwrap();
        for step in &log.steps {
            let load: f64 = step.units.iter().map(|u| u.energy).sum();
            assert!(load <= plant.power_cap + 1e-9);
        }
        assert!(log.startups() > 0);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let plant = presets::homogeneous_three();
        let mut spec = FixedCycleSpec::default_for(&plant);
        spec.units[0].offset = 99;
        assert!(matches!(
            run_fixed(&plant, &series(vec![0.0; 16]), &spec),
            Err(BaselineError::OffsetTooLarge { .. })
        ));
        let mut spec = FixedCycleSpec::default_for(&plant);
        spec.units.pop();
        assert!(matches!(
            run_fixed(&plant, &series(vec![0.0; 16]), &spec),
            Err(BaselineError::UnitCountMismatch { .. })
        ));
    }
}
