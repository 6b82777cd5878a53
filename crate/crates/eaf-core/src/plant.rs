//! Furnace and plant parameter types, the two-stage cycle simulator, and
//! per-step profit accounting shared by every dispatch policy.
//!
//! All power figures are stored as energy per 5-minute step (MWh/step), so
//! an electricity cost is simply `price * energy` with prices in $/MWh.
//! Material quantities are tons, money is dollars.

use thiserror::Error;

/// Tolerance for stock and rate feasibility checks. Matches the absolute
/// tolerance the MILP solver guarantees on its constraint residuals.
pub const FEAS_TOL: f64 = 1e-6;

/// How material stocks respond to melting and tapping.
///
/// `AsWritten` transcribes the printed balance equations: tapping draws on
/// the solid stock and melting on the molten stock, so revenue is possible
/// without melting. `Physical` routes material solid -> molten -> tapped:
/// melting consumes solid stock and tapping drains molten stock. `Physical`
/// is the default for all experiments; `AsWritten` is kept for transcription
/// tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelVariant {
    AsWritten,
    #[default]
    Physical,
}

impl ModelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::AsWritten => "as_written",
            ModelVariant::Physical => "physical",
        }
    }
}

/// Nameplate parameters of a single furnace.
#[derive(Debug, Clone, PartialEq)]
pub struct FurnaceParams {
    /// Batch input size charged at startup (ton).
    pub batch_size: f64,
    /// Maximum production (tapping) rate (ton/step).
    pub max_tap_rate: f64,
    /// Maximum melting rate (ton/step).
    pub max_melt_rate: f64,
    /// Market price of product ($/ton).
    pub sell_price: f64,
    /// Material-to-product conversion ratio, in (0, 1].
    pub yield_frac: f64,
    /// Processing cost per ton of input ($/ton).
    pub proc_cost: f64,
    /// Startup penalty charged whenever a new batch is initiated ($).
    pub startup_cost: f64,
    /// Extra energy drawn during the melting stage (MWh/step).
    pub melt_energy: f64,
    /// Base energy drawn whenever the furnace is on (MWh/step).
    pub base_energy: f64,
}

impl FurnaceParams {
    /// Energy drawn when the furnace melts at full power (MWh/step).
    pub fn full_load(&self) -> f64 {
        self.base_energy + self.melt_energy
    }

    /// Gross margin of one fully tapped batch before energy and startup
    /// costs: `pi * alpha * I - C * I`.
    pub fn batch_margin(&self) -> f64 {
        (self.sell_price * self.yield_frac - self.proc_cost) * self.batch_size
    }
}

/// Plant-wide configuration: the unit list plus system-level caps.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub units: Vec<FurnaceParams>,
    /// Shared feeder limit on total instantaneous power (MWh/step).
    pub power_cap: f64,
    /// Optional cap on total material charged per step (ton/step).
    pub feed_cap: Option<f64>,
    pub variant: ModelVariant,
}

impl PlantConfig {
    pub fn unit_count(&self) -> usize {
        self.units.len()
    }
}

/// Built-in parameter sets used by the bundled experiments and tests.
pub mod presets {
    use super::{FurnaceParams, ModelVariant, PlantConfig};

    /// Standard furnace unit. Rates follow the reading under which every
    /// unit melts a batch in twelve steps and the cycle energy matches the
    /// 0.49 MWh/ton calibration.
    pub fn standard_unit() -> FurnaceParams {
        FurnaceParams {
            batch_size: 1.0,
            max_tap_rate: 1.0 / 15.0,
            max_melt_rate: 1.0 / 12.0,
            sell_price: 400.0,
            yield_frac: 0.92,
            proc_cost: 300.0,
            startup_cost: 50.0,
            melt_energy: 0.0367,
            base_energy: 0.0033,
        }
    }

    /// High-efficiency furnace unit.
    pub fn high_efficiency_unit() -> FurnaceParams {
        FurnaceParams {
            batch_size: 1.2,
            max_tap_rate: 1.0 / 15.0,
            max_melt_rate: 1.0 / 10.0,
            sell_price: 420.0,
            yield_frac: 0.88,
            proc_cost: 280.0,
            startup_cost: 80.0,
            melt_energy: 0.0542,
            base_energy: 0.0029,
        }
    }

    /// Legacy furnace unit.
    pub fn legacy_unit() -> FurnaceParams {
        FurnaceParams {
            batch_size: 0.8,
            max_tap_rate: 1.0 / 20.0,
            max_melt_rate: 1.0 / 15.0,
            sell_price: 380.0,
            yield_frac: 0.92,
            proc_cost: 300.0,
            startup_cost: 20.0,
            melt_energy: 0.0460,
            base_energy: 0.0042,
        }
    }

    /// Feeder cap sized to the combined full load of the two largest units.
    pub const DEMO_POWER_CAP: f64 = 0.107;

    /// Three identical standard units behind the shared feeder cap.
    pub fn homogeneous_three() -> PlantConfig {
        PlantConfig {
            units: vec![standard_unit(), standard_unit(), standard_unit()],
            power_cap: DEMO_POWER_CAP,
            feed_cap: None,
            variant: ModelVariant::Physical,
        }
    }

    /// High-efficiency, standard, and legacy units behind the same cap.
    pub fn heterogeneous_three() -> PlantConfig {
        PlantConfig {
            units: vec![high_efficiency_unit(), standard_unit(), legacy_unit()],
            power_cap: DEMO_POWER_CAP,
            feed_cap: None,
            variant: ModelVariant::Physical,
        }
    }
}

/// Operating state of one furnace entering a step.
///
/// `last_tap` / `last_melt` are the rates chosen on the previous step; the
/// balance equations consume stocks with a one-step lag, so they are part of
/// the state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FurnaceState {
    /// Molten stock (ton).
    pub molten: f64,
    /// Solid charge stock (ton).
    pub solid: f64,
    /// Furnace on/off flag of the previous step.
    pub on: bool,
    /// Melting-stage flag of the previous step.
    pub melting: bool,
    /// Tapping rate of the previous step (ton/step).
    pub last_tap: f64,
    /// Melting rate of the previous step (ton/step).
    pub last_melt: f64,
}

impl FurnaceState {
    pub fn is_idle(&self) -> bool {
        !self.on && !self.melting
    }
}

/// Decision for one furnace on one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnitDecision {
    /// Start a new batch (charges `batch_size` tons and pays the startup
    /// penalty). Only allowed from an idle previous step.
    pub startup: bool,
    pub on: bool,
    pub melting: bool,
    pub tap_rate: f64,
    pub melt_rate: f64,
}

impl UnitDecision {
    pub fn idle() -> Self {
        Self::default()
    }
}

/// Joint decision over all units for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    pub units: Vec<UnitDecision>,
}

impl StepDecision {
    pub fn all_idle(unit_count: usize) -> Self {
        Self {
            units: vec![UnitDecision::idle(); unit_count],
        }
    }
}

/// Realized flows of one furnace on one step, sufficient for profit
/// accounting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnitFlows {
    pub startup: bool,
    /// Material charged this step (ton); equals `batch_size` iff `startup`.
    pub input: f64,
    /// Tapping rate this step (ton/step) — the revenue flow.
    pub tap_rate: f64,
    /// Energy drawn this step (MWh/step).
    pub energy: f64,
}

/// Result of stepping one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitOutcome {
    pub state: FurnaceState,
    pub flows: UnitFlows,
}

/// Result of stepping the whole plant for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub units: Vec<UnitOutcome>,
    pub total_energy: f64,
    pub profit: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("melting stage requires the furnace to be on")]
    MeltingWhileOff,
    #[error("startup from a non-idle previous step")]
    StartupFromActive,
    #[error("infeasible decision: {0}")]
    InfeasibleDecision(String),
    #[error("plant power cap exceeded: total {total} > cap {cap}")]
    PowerCapExceeded { total: f64, cap: f64 },
    #[error("plant feed cap exceeded: total {total} > cap {cap}")]
    FeedCapExceeded { total: f64, cap: f64 },
    #[error("decision covers {got} units, plant has {expected}")]
    UnitCountMismatch { got: usize, expected: usize },
}

/// Energy drawn by a furnace given its stage flags (MWh/step).
///
/// Rejects the melting flag without the on flag; melting is only possible
/// while the furnace is on.
pub fn power_draw(on: bool, melting: bool, params: &FurnaceParams) -> Result<f64, PlantError> {
    if melting && !on {
        return Err(PlantError::MeltingWhileOff);
    }
    let u = if on { 1.0 } else { 0.0 };
    let v = if melting { 1.0 } else { 0.0 };
    Ok(params.base_energy * u + params.melt_energy * v)
}

/// Advance one furnace by one step.
///
/// Stocks are updated with the one-step consumption lag: this step's rates
/// drain stocks on the next step. The decision must satisfy the rate caps
/// and the variant's stock limits; violations beyond [`FEAS_TOL`] are
/// rejected.
pub fn step_furnace(
    state: &FurnaceState,
    decision: &UnitDecision,
    params: &FurnaceParams,
    variant: ModelVariant,
) -> Result<UnitOutcome, PlantError> {
    if decision.startup && !state.is_idle() {
        return Err(PlantError::StartupFromActive);
    }
    let energy = power_draw(decision.on, decision.melting, params)?;

    let input = if decision.startup {
        params.batch_size
    } else {
        0.0
    };

    // Balance update comes first: stocks at this step include the fresh
    // charge and the lagged outflows of the previous step.
    let (molten, solid) = match variant {
        ModelVariant::AsWritten => (
            state.molten + input - state.last_melt,
            state.solid + input - state.last_tap,
        ),
        ModelVariant::Physical => (
            state.molten + state.last_melt - state.last_tap,
            state.solid + input - state.last_melt,
        ),
    };
    if molten < -FEAS_TOL || solid < -FEAS_TOL {
        return Err(PlantError::InfeasibleDecision(format!(
            "negative stock after balance update (molten {molten:.9}, solid {solid:.9})"
        )));
    }
    let molten = molten.max(0.0);
    let solid = solid.max(0.0);

    // Rates must be nonnegative and tied to the stage flags; the nameplate
    // rate caps are the caller's precondition and are deliberately not
    // enforced here, because the nominal cycle templates run the batch
    // through faster than the caps allow.
    if decision.tap_rate < -FEAS_TOL || (!decision.on && decision.tap_rate > FEAS_TOL) {
        return Err(PlantError::InfeasibleDecision(format!(
            "tap rate {} without the on flag",
            decision.tap_rate
        )));
    }
    if decision.melt_rate < -FEAS_TOL || (!decision.melting && decision.melt_rate > FEAS_TOL) {
        return Err(PlantError::InfeasibleDecision(format!(
            "melt rate {} without the melting flag",
            decision.melt_rate
        )));
    }

    // Variant stock limits on this step's rates.
    let (tap_stock, melt_stock) = match variant {
        ModelVariant::AsWritten => (solid, molten),
        ModelVariant::Physical => (molten, solid),
    };
    if decision.tap_rate > tap_stock + FEAS_TOL {
        return Err(PlantError::InfeasibleDecision(format!(
            "tap rate {} exceeds available stock {}",
            decision.tap_rate, tap_stock
        )));
    }
    if decision.melt_rate > melt_stock + FEAS_TOL {
        return Err(PlantError::InfeasibleDecision(format!(
            "melt rate {} exceeds available stock {}",
            decision.melt_rate, melt_stock
        )));
    }

    let next = FurnaceState {
        molten,
        solid,
        on: decision.on,
        melting: decision.melting,
        last_tap: decision.tap_rate.max(0.0),
        last_melt: decision.melt_rate.max(0.0),
    };
    Ok(UnitOutcome {
        state: next,
        flows: UnitFlows {
            startup: decision.startup,
            input,
            tap_rate: decision.tap_rate.max(0.0),
            energy,
        },
    })
}

/// Profit of one step at price `price` ($/MWh), summed over units:
/// `pi*alpha*r - C*i - price*P - delta*y`.
pub fn step_profit(flows: &[UnitFlows], price: f64, units: &[FurnaceParams]) -> f64 {
    flows
        .iter()
        .zip(units)
        .map(|(f, p)| {
            let startup = if f.startup { p.startup_cost } else { 0.0 };
            p.sell_price * p.yield_frac * f.tap_rate - p.proc_cost * f.input - price * f.energy
                - startup
        })
        .sum()
}

/// Advance the whole plant by one step, enforcing the shared caps, and
/// account the step profit at `price`.
pub fn step_plant(
    states: &[FurnaceState],
    decision: &StepDecision,
    plant: &PlantConfig,
    price: f64,
) -> Result<StepOutcome, PlantError> {
    if decision.units.len() != plant.units.len() || states.len() != plant.units.len() {
        return Err(PlantError::UnitCountMismatch {
            got: decision.units.len(),
            expected: plant.units.len(),
        });
    }
    let mut outcomes = Vec::with_capacity(plant.units.len());
    for ((state, d), params) in states.iter().zip(&decision.units).zip(&plant.units) {
        outcomes.push(step_furnace(state, d, params, plant.variant)?);
    }
    let total_energy: f64 = outcomes.iter().map(|o| o.flows.energy).sum();
    if total_energy > plant.power_cap + FEAS_TOL {
        return Err(PlantError::PowerCapExceeded {
            total: total_energy,
            cap: plant.power_cap,
        });
    }
    if let Some(cap) = plant.feed_cap {
        let total_input: f64 = outcomes.iter().map(|o| o.flows.input).sum();
        if total_input > cap + FEAS_TOL {
            return Err(PlantError::FeedCapExceeded {
                total: total_input,
                cap,
            });
        }
    }
    let flows: Vec<UnitFlows> = outcomes.iter().map(|o| o.flows).collect();
    let profit = step_profit(&flows, price, &plant.units);
    Ok(StepOutcome {
        units: outcomes,
        total_energy,
        profit,
    })
}

/// Total electrical energy per ton of product over one nominal cycle:
/// the high-power phase lasts one batch at the melt-rate cap and the
/// low-power phase one batch at the tap-rate cap, so the figure is
/// `P_melt * (I / melt_rate) / I + P_base * (I / tap_rate) / I` (MWh/ton).
pub fn cycle_energy_per_ton(params: &FurnaceParams) -> f64 {
    let batch = params.batch_size;
    let melt_steps = batch / params.max_melt_rate;
    let tap_steps = batch / params.max_tap_rate;
    params.melt_energy * melt_steps / batch + params.base_energy * tap_steps / batch
}

/// One violation found by [`validate_plant`].
#[derive(Debug, Clone, PartialEq)]
pub enum PlantViolation {
    NoUnits,
    NonPositiveField { unit: usize, field: &'static str },
    YieldOutOfRange { unit: usize, value: f64 },
    MeltNotAboveBase { unit: usize },
    PowerCapTooSmall { cap: f64, required: f64 },
    FeedCapNonPositive { cap: f64 },
}

impl std::fmt::Display for PlantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlantViolation::NoUnits => write!(f, "plant has no units"),
            PlantViolation::NonPositiveField { unit, field } => {
                write!(f, "unit {unit}: {field} must be strictly positive")
            }
            PlantViolation::YieldOutOfRange { unit, value } => {
                write!(f, "unit {unit}: yield {value} outside (0, 1]")
            }
            PlantViolation::MeltNotAboveBase { unit } => {
                write!(f, "unit {unit}: melt_energy must exceed base_energy")
            }
            PlantViolation::PowerCapTooSmall { cap, required } => write!(
                f,
                "power cap {cap} cannot cover any unit at full load (needs > {required})"
            ),
            PlantViolation::FeedCapNonPositive { cap } => {
                write!(f, "feed cap {cap} must be strictly positive")
            }
        }
    }
}

/// Check every type invariant of a plant configuration and return all
/// violations found. An empty list means the plant is valid.
pub fn validate_plant(config: &PlantConfig) -> Vec<PlantViolation> {
    let mut out = Vec::new();
    if config.units.is_empty() {
        out.push(PlantViolation::NoUnits);
    }
    for (i, u) in config.units.iter().enumerate() {
        let positive = [
            (u.batch_size, "batch_size"),
            (u.max_tap_rate, "max_tap_rate"),
            (u.max_melt_rate, "max_melt_rate"),
            (u.sell_price, "sell_price"),
            (u.proc_cost, "proc_cost"),
            (u.startup_cost, "startup_cost"),
            (u.melt_energy, "melt_energy"),
            (u.base_energy, "base_energy"),
        ];
        for (value, field) in positive {
            if !(value > 0.0) || !value.is_finite() {
                out.push(PlantViolation::NonPositiveField { unit: i, field });
            }
        }
        if !(u.yield_frac > 0.0 && u.yield_frac <= 1.0) {
            out.push(PlantViolation::YieldOutOfRange {
                unit: i,
                value: u.yield_frac,
            });
        }
        if u.melt_energy <= u.base_energy {
            out.push(PlantViolation::MeltNotAboveBase { unit: i });
        }
    }
    if let Some(min_full_load) = config
        .units
        .iter()
        .map(FurnaceParams::full_load)
        .min_by(|a, b| a.total_cmp(b))
    {
        // At least one unit must be able to melt under the cap.
        if config.power_cap <= min_full_load {
            out.push(PlantViolation::PowerCapTooSmall {
                cap: config.power_cap,
                required: min_full_load,
            });
        }
    }
    if let Some(cap) = config.feed_cap {
        if !(cap > 0.0) {
            out.push(PlantViolation::FeedCapNonPositive { cap });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_unit() -> FurnaceParams {
        presets::standard_unit()
    }

    #[test]
    fn power_draw_matches_stage_flags() {
        let p = std_unit();
        assert_eq!(power_draw(false, false, &p).unwrap(), 0.0);
        assert!((power_draw(true, false, &p).unwrap() - 0.0033).abs() < 1e-12);
        assert!((power_draw(true, true, &p).unwrap() - 0.0400).abs() < 1e-12);
        assert_eq!(
            power_draw(false, true, &p).unwrap_err(),
            PlantError::MeltingWhileOff
        );
    }

    #[test]
    fn charging_only_fills_solid_stock() {
        let p = std_unit();
        let d = UnitDecision {
            startup: true,
            on: true,
            melting: false,
            tap_rate: 0.0,
            melt_rate: 0.0,
        };
        let out = step_furnace(&FurnaceState::default(), &d, &p, ModelVariant::Physical).unwrap();
        assert!((out.state.solid - 1.0).abs() < 1e-12);
        assert_eq!(out.state.molten, 0.0);
        assert!((out.flows.input - 1.0).abs() < 1e-12);
    }

    #[test]
    fn physical_melt_converts_solid_to_molten_with_lag() {
        let p = std_unit();
        let state = FurnaceState {
            molten: 0.0,
            solid: 1.0,
            on: true,
            melting: true,
            last_tap: 0.0,
            last_melt: 1.0 / 15.0,
        };
        // The lagged melt rate moves 1/15 ton solid -> molten on this step.
        let out = step_furnace(
            &state,
            &UnitDecision {
                on: true,
                melting: false,
                ..UnitDecision::idle()
            },
            &p,
            ModelVariant::Physical,
        )
        .unwrap();
        assert!((out.state.solid - (1.0 - 1.0 / 15.0)).abs() < 1e-12);
        assert!((out.state.molten - 1.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn as_written_update_follows_printed_balances() {
        let p = std_unit();
        let state = FurnaceState {
            molten: 1.0,
            solid: 1.0,
            on: true,
            melting: true,
            last_tap: 1.0 / 12.0,
            last_melt: 1.0 / 15.0,
        };
        let out = step_furnace(
            &state,
            &UnitDecision {
                on: true,
                melting: false,
                ..UnitDecision::idle()
            },
            &p,
            ModelVariant::AsWritten,
        )
        .unwrap();
        assert!((out.state.molten - (1.0 - 1.0 / 15.0)).abs() < 1e-12);
        assert!((out.state.solid - (1.0 - 1.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn startup_from_active_is_rejected() {
        let p = std_unit();
        let state = FurnaceState {
            on: true,
            ..FurnaceState::default()
        };
        let d = UnitDecision {
            startup: true,
            on: true,
            ..UnitDecision::idle()
        };
        assert_eq!(
            step_furnace(&state, &d, &p, ModelVariant::Physical).unwrap_err(),
            PlantError::StartupFromActive
        );
    }

    #[test]
    fn negative_stock_is_rejected() {
        let p = std_unit();
        // Inconsistent state: pending tap larger than the molten stock.
        let state = FurnaceState {
            molten: 0.01,
            solid: 0.0,
            on: true,
            melting: false,
            last_tap: 0.05,
            last_melt: 0.0,
        };
        let err = step_furnace(
            &state,
            &UnitDecision::idle(),
            &p,
            ModelVariant::Physical,
        )
        .unwrap_err();
        assert!(matches!(err, PlantError::InfeasibleDecision(_)));
    }

    #[test]
    fn step_profit_matches_hand_computed_values() {
        let p = std_unit();
        // All idle.
        assert_eq!(step_profit(&[UnitFlows::default()], 40.0, &[p.clone()]), 0.0);
        // One startup step: y=1, u=v=1, r=k=0.
        let startup = UnitFlows {
            startup: true,
            input: 1.0,
            tap_rate: 0.0,
            energy: 0.04,
        };
        let profit = step_profit(&[startup], 40.0, &[p.clone()]);
        assert!((profit - (-351.6)).abs() < 1e-9, "got {profit}");
        // One tapping step: u=1, v=0, r=1/12, y=0, i=0.
        let tapping = UnitFlows {
            startup: false,
            input: 0.0,
            tap_rate: 1.0 / 12.0,
            energy: 0.0033,
        };
        let profit = step_profit(&[tapping], 40.0, &[p]);
        let expect = 400.0 * 0.92 / 12.0 - 40.0 * 0.0033;
        assert!((profit - expect).abs() < 1e-9);
        assert!((profit - 30.535).abs() < 5e-4);
    }

    #[test]
    fn cycle_energy_calibration() {
        let std = std_unit();
        let e = cycle_energy_per_ton(&std);
        assert!((e - 0.4899).abs() < 1e-9, "got {e}");

        let zero = FurnaceParams {
            melt_energy: 0.0,
            base_energy: 0.0,
            ..std
        };
        assert_eq!(cycle_energy_per_ton(&zero), 0.0);

        // High-efficiency unit under the same expression:
        // (0.0542 * 12 + 0.0029 * 18) / 1.2.
        let he = presets::high_efficiency_unit();
        let e = cycle_energy_per_ton(&he);
        let expect = (0.0542 * 12.0 + 0.0029 * 18.0) / 1.2;
        assert!((e - expect).abs() < 1e-9, "got {e}, want {expect}");
    }

    #[test]
    fn validate_flags_every_violation() {
        assert!(validate_plant(&presets::homogeneous_three()).is_empty());
        assert!(validate_plant(&presets::heterogeneous_three()).is_empty());

        let mut bad = presets::homogeneous_three();
        bad.units[1].yield_frac = 1.3;
        bad.power_cap = 0.01;
        let violations = validate_plant(&bad);
        assert!(violations
            .iter()
            .any(|v| matches!(v, PlantViolation::YieldOutOfRange { unit: 1, .. })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, PlantViolation::PowerCapTooSmall { .. })));
    }

    #[test]
    fn plant_cap_enforced_on_step() {
        let plant = presets::homogeneous_three();
        let states = vec![FurnaceState::default(); 3];
        let melt_all = StepDecision {
            units: vec![
                UnitDecision {
                    startup: true,
                    on: true,
                    melting: true,
                    tap_rate: 0.0,
                    melt_rate: 0.0,
                };
                3
            ],
        };
        // 3 * 0.04 = 0.12 > 0.107.
        let err = step_plant(&states, &melt_all, &plant, 40.0).unwrap_err();
        assert!(matches!(err, PlantError::PowerCapExceeded { .. }));
    }

    #[test]
    fn complete_cycle_profit_identity_at_constant_price() {
        // Simulate one isolated full cycle at constant price and compare the
        // cumulative profit against pi*alpha*I - C*I - price*E_cycle - delta.
        let p = std_unit();
        let price = 37.0;
        let mut state = FurnaceState::default();
        let mut cumulative = 0.0;
        let mut cycle_energy = 0.0;

        let mut run = |state: &mut FurnaceState, d: UnitDecision| {
            let out = step_furnace(state, &d, &p, ModelVariant::Physical).unwrap();
            cumulative += step_profit(&[out.flows], price, std::slice::from_ref(&p));
            cycle_energy += out.flows.energy;
            *state = out.state;
        };

        // Charge + melt for 15 steps at max rate.
        run(
            &mut state,
            UnitDecision {
                startup: true,
                on: true,
                melting: true,
                tap_rate: 0.0,
                melt_rate: 1.0 / 15.0,
            },
        );
        for _ in 1..15 {
            run(
                &mut state,
                UnitDecision {
                    on: true,
                    melting: true,
                    melt_rate: 1.0 / 15.0,
                    ..UnitDecision::idle()
                },
            );
        }
        // Tap everything out at max rate; molten arrives with one step lag.
        for _ in 0..12 {
            let tap = state.molten.min(1.0 / 12.0);
            run(
                &mut state,
                UnitDecision {
                    on: true,
                    melting: false,
                    tap_rate: tap,
                    ..UnitDecision::idle()
                },
            );
        }
        // Final settle step: lagged flows drain, furnace off.
        run(&mut state, UnitDecision::idle());

        assert!(state.molten.abs() < 1e-9, "molten left: {}", state.molten);
        assert!(state.solid.abs() < 1e-9);
        let expect = 400.0 * 0.92 - 300.0 - price * cycle_energy - 50.0;
        assert!(
            (cumulative - expect).abs() < 1e-9,
            "cumulative {cumulative} vs identity {expect}"
        );
    }
}
