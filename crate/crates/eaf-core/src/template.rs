//! Fixed furnace cycle templates shared by the learning dispatcher, the
//! fixed-cycle baselines, and the template-restricted dynamic program.
//!
//! A template cycle runs 16 steps: 12 melting steps at full power followed
//! by 4 tapping steps at base power that discharge the batch in equal
//! quarters. Template rates deliberately describe the nominal duty cycle
//! rather than the nameplate rate caps; stocks still evolve consistently
//! under the balance rules.

use crate::dispatch::{StepRecord, UnitRecord};
use crate::plant::{
    step_profit, FurnaceParams, FurnaceState, PlantConfig, UnitDecision, UnitFlows,
};

pub const CYCLE_STEPS: usize = 16;
pub const MELT_PHASE_STEPS: usize = 12;
pub const TAP_PHASE_STEPS: usize = 4;

/// Per-step energy and output pattern of one unit's nominal cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTemplate {
    /// Steps in the cycle (melting first, then tapping).
    pub length: usize,
    pub melt_steps: usize,
    /// Energy drawn at each cycle position (MWh/step).
    pub energy: Vec<f64>,
    /// Tapping output at each cycle position (ton/step).
    pub output: Vec<f64>,
    /// Melting rate at each position (ton/step); the batch melts evenly
    /// across the melting phase.
    pub melt_rate: Vec<f64>,
}

impl CycleTemplate {
    pub fn for_unit(params: &FurnaceParams) -> Self {
        let length = CYCLE_STEPS;
        let melt_steps = MELT_PHASE_STEPS;
        let tap_steps = length - melt_steps;
        let mut energy = Vec::with_capacity(length);
        let mut output = Vec::with_capacity(length);
        let mut melt_rate = Vec::with_capacity(length);
        for pos in 0..length {
            if pos < melt_steps {
                energy.push(params.full_load());
                output.push(0.0);
                melt_rate.push(params.batch_size / melt_steps as f64);
            } else {
                energy.push(params.base_energy);
                output.push(params.batch_size / tap_steps as f64);
                melt_rate.push(0.0);
            }
        }
        Self {
            length,
            melt_steps,
            energy,
            output,
            melt_rate,
        }
    }

    /// Total energy of one cycle (MWh).
    pub fn cycle_energy(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// Stage decision at a cycle position.
    pub fn decision_at(&self, pos: usize) -> UnitDecision {
        UnitDecision {
            startup: pos == 0,
            on: true,
            melting: pos < self.melt_steps,
            tap_rate: self.output[pos],
            melt_rate: self.melt_rate[pos],
        }
    }
}

/// Templates for every unit of a plant.
pub fn plant_templates(plant: &PlantConfig) -> Vec<CycleTemplate> {
    plant.units.iter().map(CycleTemplate::for_unit).collect()
}

/// Remaining-cycle counters: 0 is idle, `L` means the cycle starts this
/// step (position `L - tau`).
pub fn position(tau: u16) -> Option<usize> {
    if tau == 0 {
        None
    } else {
        Some(CYCLE_STEPS - tau as usize)
    }
}

/// Projected plant load at `offset` steps from now, given the remaining
/// counters `tau` and the units newly started this step (`starts`).
pub fn projected_load(
    templates: &[CycleTemplate],
    tau: &[u16],
    starts: u64,
    offset: usize,
) -> f64 {
    let mut load = 0.0;
    for (i, template) in templates.iter().enumerate() {
        let pos = if starts & (1 << i) != 0 {
            Some(offset)
        } else {
            position(tau[i]).map(|p| p + offset)
        };
        if let Some(p) = pos {
            if p < template.length {
                load += template.energy[p];
            }
        }
    }
    load
}

/// True when starting `starts` (bitmask over units) keeps the projected
/// load under the cap at every step of the committed cycles.
pub fn starts_fit_under_cap(
    templates: &[CycleTemplate],
    tau: &[u16],
    starts: u64,
    power_cap: f64,
) -> bool {
    for offset in 0..CYCLE_STEPS {
        if projected_load(templates, tau, starts, offset) > power_cap + 1e-9 {
            return false;
        }
    }
    true
}

/// Advance furnace states one step under template control and produce the
/// dispatch record. `positions[i]` is `Some(pos)` for units in a cycle.
///
/// Template cycles may restart back-to-back (a new charge on the step
/// right after the final tap), which the scheduling program's startup
/// logic would forbid; the balance update therefore lives here rather
/// than routing through [`step_furnace`]. Stocks follow the `Physical`
/// variant rules and stay non-negative for every template schedule.
pub fn template_step(
    states: &mut [FurnaceState],
    positions: &[Option<usize>],
    templates: &[CycleTemplate],
    plant: &PlantConfig,
    price: f64,
) -> Result<StepRecord, crate::plant::PlantError> {
    let mut units = Vec::with_capacity(states.len());
    let mut flows: Vec<UnitFlows> = Vec::with_capacity(states.len());
    for (i, state) in states.iter_mut().enumerate() {
        let decision = match positions[i] {
            Some(pos) => templates[i].decision_at(pos),
            None => UnitDecision::idle(),
        };
        let params = &plant.units[i];
        let input = if decision.startup {
            params.batch_size
        } else {
            0.0
        };
        let molten = state.molten + state.last_melt - state.last_tap;
        let solid = state.solid + input - state.last_melt;
        if molten < -crate::plant::FEAS_TOL || solid < -crate::plant::FEAS_TOL {
            return Err(crate::plant::PlantError::InfeasibleDecision(format!(
                "template balance went negative (molten {molten:.9}, solid {solid:.9})"
            )));
        }
        let molten = molten.max(0.0);
        let solid = solid.max(0.0);
        if decision.tap_rate > molten + crate::plant::FEAS_TOL
            || decision.melt_rate > solid + crate::plant::FEAS_TOL
        {
            return Err(crate::plant::PlantError::InfeasibleDecision(
                "template rate exceeds available stock".into(),
            ));
        }
        let energy = crate::plant::power_draw(decision.on, decision.melting, params)?;
        let next = FurnaceState {
            molten,
            solid,
            on: decision.on,
            melting: decision.melting,
            last_tap: decision.tap_rate,
            last_melt: decision.melt_rate,
        };
        let unit_flows = UnitFlows {
            startup: decision.startup,
            input,
            tap_rate: decision.tap_rate,
            energy,
        };
        units.push(UnitRecord {
            on: decision.on,
            melting: decision.melting,
            startup: decision.startup,
            tap_rate: decision.tap_rate,
            melt_rate: decision.melt_rate,
            input,
            energy,
            molten,
            solid,
        });
        flows.push(unit_flows);
        *state = next;
    }
    let profit = step_profit(&flows, price, &plant.units);
    Ok(StepRecord {
        price,
        profit,
        units,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::presets;

    #[test]
    fn template_pattern_matches_duty_cycle() {
        let t = CycleTemplate::for_unit(&presets::standard_unit());
        assert_eq!(t.length, 16);
        assert_eq!(t.melt_steps, 12);
        assert!((t.energy[0] - 0.04).abs() < 1e-12);
        assert!((t.energy[12] - 0.0033).abs() < 1e-12);
        let total_output: f64 = t.output.iter().sum();
        assert!((total_output - 1.0).abs() < 1e-12);
        let total_energy = t.cycle_energy();
        assert!((total_energy - (12.0 * 0.04 + 4.0 * 0.0033)).abs() < 1e-12);
    }

    #[test]
    fn full_cycle_conserves_mass_and_settles_startup_once() {
        let plant = {
            let mut p = presets::homogeneous_three();
            p.units.truncate(1);
            p
        };
        let templates = plant_templates(&plant);
        let mut states = vec![FurnaceState::default()];
        let mut profit = 0.0;
        let mut startups = 0;
        for pos in 0..CYCLE_STEPS {
            let rec =
                template_step(&mut states, &[Some(pos)], &templates, &plant, 0.0).unwrap();
            profit += rec.profit;
            startups += rec.units[0].startup as u32;
        }
        // Settle step: the lagged final tap drains the molten stock.
        let rec = template_step(&mut states, &[None], &templates, &plant, 0.0).unwrap();
        profit += rec.profit;
        assert_eq!(startups, 1);
        assert!(states[0].molten.abs() < 1e-9);
        assert!(states[0].solid.abs() < 1e-9);
        // Zero prices: profit is the batch margin minus startup cost.
        assert!((profit - 18.0).abs() < 1e-9, "profit {profit}");
    }

    #[test]
    fn cap_projection_masks_triple_start() {
        let plant = presets::homogeneous_three();
        let templates = plant_templates(&plant);
        let tau = vec![0u16; 3];
        // Any pair fits (2 * 0.04 <= 0.107), all three do not.
        assert!(starts_fit_under_cap(&templates, &tau, 0b011, plant.power_cap));
        assert!(starts_fit_under_cap(&templates, &tau, 0b101, plant.power_cap));
        assert!(!starts_fit_under_cap(&templates, &tau, 0b111, plant.power_cap));

        // Unit 0 mid-melt: starting both idle units is masked, one is fine.
        let tau = vec![5u16, 0, 0];
        assert!(!starts_fit_under_cap(&templates, &tau, 0b110, plant.power_cap));
        assert!(starts_fit_under_cap(&templates, &tau, 0b010, plant.power_cap));
    }
}
