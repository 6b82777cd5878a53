//! Tabular Q-learning dispatcher over template furnace cycles.
//!
//! The agent observes a day-ahead price bucket plus each unit's
//! remaining-cycle counter, chooses a joint startup action masked by the
//! shared power cap, and learns from a reward that smooths the startup
//! penalty evenly across a cycle's active steps. Training uses day-ahead
//! prices only; evaluation runs the greedy policy on day-ahead features
//! while settling profits ex post on real-time prices.

use crate::dispatch::DispatchLog;
use crate::plant::{FurnaceState, PlantConfig};
use crate::prices::{PriceBucketizer, PriceError, PriceSeries, BUCKET_COUNT, STEPS_PER_DAY};
use crate::template::{
    plant_templates, position, starts_fit_under_cap, template_step, CycleTemplate, CYCLE_STEPS,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

/// Remaining-cycle counter values per unit: 0..=CYCLE_STEPS.
pub const TAU_STATES: usize = CYCLE_STEPS + 1;

/// Absolute tolerance under which two Q-values count as tied.
pub const Q_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum QlError {
    #[error(transparent)]
    Price(#[from] PriceError),
    #[error(transparent)]
    Plant(#[from] crate::plant::PlantError),
    #[error("training series must contain at least one whole day")]
    TrainTooShort,
    #[error("evaluation series are not aligned (lengths {dap} vs {rtp})")]
    Misaligned { dap: usize, rtp: usize },
    #[error("action {action:#b} is infeasible in the current state")]
    InfeasibleAction { action: u64 },
    #[error("TD trace shorter than the rolling window")]
    TraceTooShort,
    #[error("q-table file is malformed: {0}")]
    BadTableFile(String),
    #[error("q-table i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Discrete environment state: price bucket plus remaining-cycle counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    pub bucket: usize,
    pub tau: Vec<u16>,
}

impl EnvState {
    pub fn idle(bucket: usize, unit_count: usize) -> Self {
        Self {
            bucket,
            tau: vec![0; unit_count],
        }
    }

    /// Bijective encoding: bucket-major, base-17 counters below.
    pub fn index(&self) -> usize {
        let mut tau_index = 0usize;
        for &t in self.tau.iter().rev() {
            tau_index = tau_index * TAU_STATES + t as usize;
        }
        self.bucket * TAU_STATES.pow(self.tau.len() as u32) + tau_index
    }

    pub fn from_index(index: usize, unit_count: usize) -> Self {
        let base = TAU_STATES.pow(unit_count as u32);
        let bucket = index / base;
        let mut rest = index % base;
        let mut tau = Vec::with_capacity(unit_count);
        for _ in 0..unit_count {
            tau.push((rest % TAU_STATES) as u16);
            rest /= TAU_STATES;
        }
        Self { bucket, tau }
    }
}

/// Dense action-value table with visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub unit_count: usize,
    pub state_count: usize,
    pub action_count: usize,
    values: Vec<f64>,
    visits: Vec<u32>,
}

impl QTable {
    pub fn new(unit_count: usize) -> Self {
        let state_count = BUCKET_COUNT * TAU_STATES.pow(unit_count as u32);
        let action_count = 1 << unit_count;
        Self {
            unit_count,
            state_count,
            action_count,
            values: vec![0.0; state_count * action_count],
            visits: vec![0; state_count * action_count],
        }
    }

    #[inline]
    fn slot(&self, state: usize, action: u64) -> usize {
        state * self.action_count + action as usize
    }

    pub fn value(&self, state: usize, action: u64) -> f64 {
        self.values[self.slot(state, action)]
    }

    pub fn visits(&self, state: usize, action: u64) -> u32 {
        self.visits[self.slot(state, action)]
    }

    pub fn visited_entries(&self) -> usize {
        self.visits.iter().filter(|&&v| v > 0).count()
    }

    /// Greatest Q-value over a feasible action set.
    pub fn max_over(&self, state: usize, actions: &[u64]) -> f64 {
        actions
            .iter()
            .map(|&a| self.value(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Versioned structured-text dump of visited entries.
    pub fn save(&self, path: &Path) -> Result<(), QlError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "eaf-qtable v1")?;
        writeln!(out, "units {}", self.unit_count)?;
        writeln!(out, "states {}", self.state_count)?;
        writeln!(out, "actions {}", self.action_count)?;
        writeln!(out, "# state action value visits")?;
        for state in 0..self.state_count {
            for action in 0..self.action_count as u64 {
                let s = self.slot(state, action);
                if self.visits[s] > 0 || self.values[s] != 0.0 {
                    writeln!(
                        out,
                        "{state} {action} {:.17e} {}",
                        self.values[s], self.visits[s]
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, QlError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| QlError::BadTableFile("empty file".into()))?;
        if header.trim() != "eaf-qtable v1" {
            return Err(QlError::BadTableFile(format!(
                "unexpected header '{header}'"
            )));
        }
        let mut table: Option<QTable> = None;
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["units", v] => {
                    let units = v.parse::<usize>().map_err(|_| {
                        QlError::BadTableFile(format!("bad unit count '{v}'"))
                    })?;
                    table = Some(QTable::new(units));
                }
                ["states", _] | ["actions", _] => {}
                [state, action, value, visits] => {
                    let t = table
                        .as_mut()
                        .ok_or_else(|| QlError::BadTableFile("missing units header".into()))?;
                    let state: usize = state
                        .parse()
                        .map_err(|_| QlError::BadTableFile("bad state index".into()))?;
                    let action: u64 = action
                        .parse()
                        .map_err(|_| QlError::BadTableFile("bad action index".into()))?;
                    if state >= t.state_count || action as usize >= t.action_count {
                        return Err(QlError::BadTableFile("entry out of range".into()));
                    }
                    let slot = t.slot(state, action);
                    t.values[slot] = value
                        .parse()
                        .map_err(|_| QlError::BadTableFile("bad value".into()))?;
                    t.visits[slot] = visits
                        .parse()
                        .map_err(|_| QlError::BadTableFile("bad visit count".into()))?;
                }
                _ => return Err(QlError::BadTableFile(format!("bad line '{line}'"))),
            }
        }
        table.ok_or_else(|| QlError::BadTableFile("missing units header".into()))
    }
}

/// Hyperparameters of the learner.
#[derive(Debug, Clone)]
pub struct RLConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub episodes: usize,
    /// Startup-penalty smoothing per unit: the penalty is charged as
    /// `delta / kappa` on each of a cycle's active steps.
    pub kappa: Vec<f64>,
    pub seed: u64,
}

impl RLConfig {
    pub fn with_uniform_kappa(unit_count: usize, kappa: f64, seed: u64) -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.99,
            epsilon_start: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.05,
            episodes: 600,
            kappa: vec![kappa; unit_count],
            seed,
        }
    }
}

/// Environment wrapper: templates plus the feasibility mask cache over all
/// remaining-counter combinations.
pub struct TemplateEnv {
    pub templates: Vec<CycleTemplate>,
    pub power_cap: f64,
    unit_count: usize,
    masks: Vec<Vec<u64>>,
}

impl TemplateEnv {
    pub fn new(plant: &PlantConfig) -> Self {
        let templates = plant_templates(plant);
        let unit_count = plant.units.len();
        let combos = TAU_STATES.pow(unit_count as u32);
        let mut masks = Vec::with_capacity(combos);
        let mut tau = vec![0u16; unit_count];
        for combo in 0..combos {
            let mut rest = combo;
            for slot in tau.iter_mut() {
                *slot = (rest % TAU_STATES) as u16;
                rest /= TAU_STATES;
            }
            let mut feasible = Vec::new();
            'action: for action in 0..(1u64 << unit_count) {
                for i in 0..unit_count {
                    if action & (1 << i) != 0 && tau[i] != 0 {
                        continue 'action;
                    }
                }
                if starts_fit_under_cap(&templates, &tau, action, plant.power_cap) {
                    feasible.push(action);
                }
            }
            masks.push(feasible);
        }
        Self {
            templates,
            power_cap: plant.power_cap,
            unit_count,
            masks,
        }
    }

    fn tau_index(&self, tau: &[u16]) -> usize {
        let mut idx = 0usize;
        for &t in tau.iter().rev() {
            idx = idx * TAU_STATES + t as usize;
        }
        idx
    }

    /// All joint startup actions feasible in `state`: idle units only, and
    /// the projected template load never exceeds the cap. The all-zeros
    /// action is always present.
    pub fn feasible_actions(&self, tau: &[u16]) -> &[u64] {
        &self.masks[self.tau_index(tau)]
    }
}

/// Feasibility-masked action set for a state (standalone form).
pub fn feasible_actions(state: &EnvState, plant: &PlantConfig) -> Vec<u64> {
    TemplateEnv::new(plant).feasible_actions(&state.tau).to_vec()
}

/// Shaped per-step reward on day-ahead prices: revenue and processing cost
/// on the tapped flow, energy at the day-ahead price, and the startup
/// penalty spread as `delta/kappa` over every active step.
pub fn shaped_reward(
    tau: &[u16],
    templates: &[CycleTemplate],
    plant: &PlantConfig,
    kappa: &[f64],
    dap_price: f64,
) -> f64 {
    let mut total = 0.0;
    for (i, template) in templates.iter().enumerate() {
        let Some(pos) = position(tau[i]) else {
            continue;
        };
        let u = &plant.units[i];
        let tapped = template.output[pos];
        let energy = template.energy[pos];
        total += (u.sell_price * u.yield_frac - u.proc_cost) * tapped - dap_price * energy
            - u.startup_cost / kappa[i];
    }
    total
}

/// One tabular update; returns the TD error.
pub fn q_update(
    table: &mut QTable,
    env: &TemplateEnv,
    state: &EnvState,
    action: u64,
    reward: f64,
    next: Option<&EnvState>,
    learning_rate: f64,
    discount: f64,
) -> Result<f64, QlError> {
    if !env.feasible_actions(&state.tau).contains(&action) {
        return Err(QlError::InfeasibleAction { action });
    }
    let s = state.index();
    let future = match next {
        Some(ns) => {
            let actions = env.feasible_actions(&ns.tau);
            table.max_over(ns.index(), actions)
        }
        None => 0.0,
    };
    let slot = table.slot(s, action);
    let old = table.values[slot];
    let td = reward + discount * future - old;
    table.values[slot] = (1.0 - learning_rate) * old + learning_rate * (reward + discount * future);
    table.visits[slot] += 1;
    Ok(td)
}

/// Template lookahead used to break Q-value ties: the cycle profit of each
/// newly started unit against the forecast slice, startup cost charged
/// once per started unit. The forecast is clamped at the series end by
/// repeating the final value.
pub fn lookahead_value(
    t: usize,
    action: u64,
    templates: &[CycleTemplate],
    plant: &PlantConfig,
    forecast: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (i, template) in templates.iter().enumerate() {
        if action & (1 << i) == 0 {
            continue;
        }
        let u = &plant.units[i];
        let margin = u.sell_price * u.yield_frac - u.proc_cost;
        let mut cycle = 0.0;
        for s in 0..template.length {
            let price = *forecast
                .get(t + s)
                .or_else(|| forecast.last())
                .unwrap_or(&0.0);
            cycle += margin * template.output[s] - price * template.energy[s];
        }
        total += cycle - u.startup_cost;
    }
    total
}

/// Greedy action: the feasible action of maximal Q, ties broken first by
/// the template lookahead and then by the lowest action index.
fn greedy_action(
    table: &QTable,
    state_index: usize,
    feasible: &[u64],
    lookahead: Option<(usize, &[f64])>,
    templates: &[CycleTemplate],
    plant: &PlantConfig,
) -> u64 {
    let best_q = table.max_over(state_index, feasible);
    let mut candidates = feasible
        .iter()
        .copied()
        .filter(|&a| table.value(state_index, a) >= best_q - Q_TIE_TOL);
    let first = candidates.next().expect("all-zeros action always feasible");
    let rest: Vec<u64> = candidates.collect();
    if rest.is_empty() {
        return first;
    }
    match lookahead {
        None => first, // lowest action index among the ties
        Some((t, forecast)) => {
            let mut best = first;
            let mut best_la = lookahead_value(t, first, templates, plant, forecast);
            for a in rest {
                let la = lookahead_value(t, a, templates, plant, forecast);
                if la > best_la + Q_TIE_TOL {
                    best = a;
                    best_la = la;
                }
            }
            best
        }
    }
}

fn advance_tau(tau: &mut [u16], action: u64) {
    for (i, slot) in tau.iter_mut().enumerate() {
        if action & (1 << i) != 0 {
            *slot = CYCLE_STEPS as u16;
        }
    }
    for slot in tau.iter_mut() {
        if *slot > 0 {
            *slot -= 1;
        }
    }
}

/// Train on day-ahead prices only. Each episode replays one uniformly
/// drawn contiguous day with furnaces reset to idle; exploration is
/// epsilon-greedy over the masked action set with per-episode decay.
/// Returns the table and the per-step TD-error trace.
pub fn train(
    plant: &PlantConfig,
    dap_train: &PriceSeries,
    bucketizer: &PriceBucketizer,
    config: &RLConfig,
) -> Result<(QTable, Vec<f64>), QlError> {
    let days = dap_train.len() / STEPS_PER_DAY;
    if days == 0 {
        return Err(QlError::TrainTooShort);
    }
    let env = TemplateEnv::new(plant);
    let n = plant.units.len();
    let mut table = QTable::new(n);
    let mut trace = Vec::with_capacity(config.episodes * STEPS_PER_DAY);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for episode in 0..config.episodes {
        let epsilon = (config.epsilon_start * config.epsilon_decay.powi(episode as i32))
            .max(config.epsilon_min);
        let day = rng.random_range(0..days);
        let base = day * STEPS_PER_DAY;
        let mut tau = vec![0u16; n];

        for k in 0..STEPS_PER_DAY {
            let t = base + k;
            let bucket = bucketizer.bucketize(dap_train, t)?;
            let state = EnvState {
                bucket,
                tau: tau.clone(),
            };
            let feasible = env.feasible_actions(&tau);
            let action = if rng.random::<f64>() < epsilon {
                feasible[rng.random_range(0..feasible.len())]
            } else {
                greedy_action(
                    &table,
                    state.index(),
                    feasible,
                    Some((t, &dap_train.values)),
                    &env.templates,
                    plant,
                )
            };

            // Template stepping: started units enter position 0 this step.
            let mut stepped = tau.clone();
            for (i, slot) in stepped.iter_mut().enumerate() {
                if action & (1 << i) != 0 {
                    *slot = CYCLE_STEPS as u16;
                }
            }
            let reward = shaped_reward(
                &stepped,
                &env.templates,
                plant,
                &config.kappa,
                dap_train.values[t],
            );
            let mut next_tau = tau.clone();
            advance_tau(&mut next_tau, action);

            let next_state = if t + 1 < dap_train.len() {
                Some(EnvState {
                    bucket: bucketizer.bucketize(dap_train, t + 1)?,
                    tau: next_tau.clone(),
                })
            } else {
                None
            };
            let td = q_update(
                &mut table,
                &env,
                &state,
                action,
                reward,
                next_state.as_ref(),
                config.learning_rate,
                config.discount,
            )?;
            trace.push(td);
            tau = next_tau;
        }
    }
    Ok((table, trace))
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Break greedy Q-ties with the template lookahead (on by default).
    pub lookahead_tiebreak: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            lookahead_tiebreak: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub log: DispatchLog,
    pub profit: f64,
    pub startups: u64,
    pub utilization: f64,
    pub daily_profit_variance: f64,
}

/// Run the greedy policy on day-ahead features and settle every step on
/// real-time prices with the full startup cost charged at the startup step.
pub fn evaluate(
    table: &QTable,
    dap_test: &PriceSeries,
    rtp_test: &PriceSeries,
    bucketizer: &PriceBucketizer,
    plant: &PlantConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, QlError> {
    if dap_test.len() != rtp_test.len() {
        return Err(QlError::Misaligned {
            dap: dap_test.len(),
            rtp: rtp_test.len(),
        });
    }
    let env = TemplateEnv::new(plant);
    let n = plant.units.len();
    let mut tau = vec![0u16; n];
    let mut states = vec![FurnaceState::default(); n];
    let mut log = DispatchLog::default();

    for t in 0..dap_test.len() {
        let bucket = bucketizer.bucketize(dap_test, t)?;
        let state = EnvState {
            bucket,
            tau: tau.clone(),
        };
        let feasible = env.feasible_actions(&tau);
        let lookahead = if opts.lookahead_tiebreak {
            Some((t, dap_test.values.as_slice()))
        } else {
            None
        };
        let action = greedy_action(
            table,
            state.index(),
            feasible,
            lookahead,
            &env.templates,
            plant,
        );

        let mut stepped = tau.clone();
        for (i, slot) in stepped.iter_mut().enumerate() {
            if action & (1 << i) != 0 {
                *slot = CYCLE_STEPS as u16;
            }
        }
        let positions: Vec<Option<usize>> = stepped.iter().map(|&s| position(s)).collect();
        let record = template_step(
            &mut states,
            &positions,
            &env.templates,
            plant,
            rtp_test.values[t],
        )?;
        log.push(record);
        advance_tau(&mut tau, action);
    }

    Ok(EvalReport {
        profit: log.cumulative_profit,
        startups: log.startups(),
        utilization: log.utilization(),
        daily_profit_variance: log.daily_profit_variance(),
        log,
    })
}

/// Centered rolling median of `|td|`; output index `i` covers the window
/// starting at trace step `i`.
pub fn td_trace_stats(trace: &[f64], window: usize) -> Result<Vec<f64>, QlError> {
    if trace.len() < window || window == 0 {
        return Err(QlError::TraceTooShort);
    }
    let mut out = Vec::with_capacity(trace.len() - window + 1);
    let mut buf: Vec<f64> = Vec::with_capacity(window);
    for start in 0..=(trace.len() - window) {
        buf.clear();
        buf.extend(trace[start..start + window].iter().map(|v| v.abs()));
        buf.sort_by(|a, b| a.total_cmp(b));
        out.push(buf[window / 2]);
    }
    Ok(out)
}

/// Median of a slice; used to summarize trace segments.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::presets;
    use crate::prices::{synth_epoch, synth_prices, Market, SynthProfile};

    fn flat_series(value: f64, days: usize) -> PriceSeries {
        PriceSeries {
            start: synth_epoch(),
            values: vec![value; days * STEPS_PER_DAY],
            market: Market::DayAhead,
        }
    }

    fn flat_bucketizer() -> PriceBucketizer {
        PriceBucketizer {
            level_thresholds: [10.0, 20.0, 30.0, 40.0],
            trend_threshold: 1.0,
        }
    }

    #[test]
    fn state_encoding_round_trips() {
        for n in 1..=3usize {
            for bucket in [0usize, 7, 14] {
                for tau0 in [0u16, 5, 16] {
                    let mut tau = vec![tau0; n];
                    if n > 1 {
                        tau[1] = 3;
                    }
                    let s = EnvState { bucket, tau };
                    let rt = EnvState::from_index(s.index(), n);
                    assert_eq!(s, rt);
                }
            }
        }
    }

    #[test]
    fn feasible_actions_respect_cap_and_idleness() {
        let plant = presets::homogeneous_three();
        let env = TemplateEnv::new(&plant);
        // All idle: the triple start exceeds the cap, every pair fits.
        let all = env.feasible_actions(&[0, 0, 0]);
        assert!(!all.contains(&0b111));
        assert!(all.contains(&0b011) && all.contains(&0b101) && all.contains(&0b110));
        assert!(all.contains(&0));
        // Mid-cycle units cannot restart.
        let mid = env.feasible_actions(&[5, 7, 3]);
        assert_eq!(mid, &[0]);
    }

    #[test]
    fn shaped_reward_matches_hand_values() {
        let plant = {
            let mut p = presets::homogeneous_three();
            p.units.truncate(1);
            p
        };
        let templates = plant_templates(&plant);
        let kappa = [13.0];
        // Melt step (position 0 => tau = 16).
        let r = shaped_reward(&[16], &templates, &plant, &kappa, 40.0);
        let expect = -40.0 * 0.04 - 50.0 / 13.0;
        assert!((r - expect).abs() < 1e-9);
        assert!((r - (-5.446)).abs() < 5e-4, "got {r}");
        // Tap step (position 12 => tau = 4): output 0.25 ton.
        let r = shaped_reward(&[4], &templates, &plant, &kappa, 40.0);
        let expect = (400.0 * 0.92 - 300.0) * 0.25 - 40.0 * 0.0033 - 50.0 / 13.0;
        assert!((r - expect).abs() < 1e-9);
        assert!((r - 13.022).abs() < 5e-4, "got {r}");
        // Idle: zero.
        assert_eq!(shaped_reward(&[0], &templates, &plant, &kappa, 40.0), 0.0);
    }

    #[test]
    fn q_update_arithmetic_and_masking() {
        let plant = presets::homogeneous_three();
        let env = TemplateEnv::new(&plant);
        let mut table = QTable::new(3);
        let s = EnvState::idle(0, 3);
        let td = q_update(&mut table, &env, &s, 0, 0.0, None, 0.1, 0.99).unwrap();
        assert_eq!(td, 0.0);
        assert_eq!(table.value(s.index(), 0), 0.0);

        let td = q_update(&mut table, &env, &s, 0b001, 10.0, None, 0.1, 0.99).unwrap();
        assert_eq!(td, 10.0);
        assert!((table.value(s.index(), 0b001) - 1.0).abs() < 1e-12);

        // Infeasible action is a contract violation.
        let busy = EnvState {
            bucket: 0,
            tau: vec![5, 0, 0],
        };
        assert!(matches!(
            q_update(&mut table, &env, &busy, 0b001, 0.0, None, 0.1, 0.99),
            Err(QlError::InfeasibleAction { .. })
        ));

        // The bootstrap max runs over the masked set only: poison the
        // infeasible triple start with a huge value and check it is
        // ignored from a state where it is masked.
        let next = EnvState::idle(0, 3);
        let slot_all = next.index();
        table.values[slot_all * table.action_count + 0b111] = 1e9;
        let td = q_update(&mut table, &env, &s, 0, 0.0, Some(&next), 1.0, 1.0).unwrap();
        assert!(td < 1e8, "masked action leaked into the bootstrap: {td}");
    }

    #[test]
    fn lookahead_cycle_values() {
        let plant = {
            let mut p = presets::homogeneous_three();
            p.units.truncate(1);
            p
        };
        let templates = plant_templates(&plant);
        assert_eq!(lookahead_value(0, 0, &templates, &plant, &[0.0; 16]), 0.0);
        let v = lookahead_value(0, 1, &templates, &plant, &vec![0.0; 16]);
        assert!((v - 18.0).abs() < 1e-9, "got {v}");
        // Flat 40 $/MWh: cycle energy is 12*0.04 + 4*0.0033 = 0.4932 MWh.
        let v = lookahead_value(0, 1, &templates, &plant, &vec![40.0; 16]);
        let expect = 68.0 - 40.0 * 0.4932 - 50.0;
        assert!((v - expect).abs() < 1e-9, "got {v}");
        // Clamped at the series end by repeating the last value.
        let v_clamped = lookahead_value(0, 1, &templates, &plant, &[40.0]);
        assert!((v_clamped - expect).abs() < 1e-9);
    }

    #[test]
    fn zero_episodes_leave_table_empty() {
        let plant = presets::homogeneous_three();
        let dap = flat_series(0.0, 8);
        let bucketizer = flat_bucketizer();
        let mut config = RLConfig::with_uniform_kappa(3, 16.0, 1);
        config.episodes = 0;
        let (table, trace) = train(&plant, &dap, &bucketizer, &config).unwrap();
        assert_eq!(table.visited_entries(), 0);
        assert!(trace.is_empty());
    }

    #[test]
    fn kappa_cliff_under_flat_prices() {
        // kappa = 16 at zero prices: per-cycle shaped profit is
        // 68 - 16 * 50/16 = 18 > 0, so the greedy policy starts whenever
        // feasible. kappa = 11: the shaped penalty 16 * 50/11 = 72.7
        // exceeds the 68 gross margin, so the learned policy idles.
        let plant = presets::homogeneous_three();
        let dap = flat_series(0.0, 8);
        let bucketizer = flat_bucketizer();

        // Tabular credit must travel back through the 16-step cycle chain,
        // which takes a few thousand day-episodes at this learning rate.
        for (kappa, expect_starts) in [(16.0, true), (11.0, false)] {
            let mut config = RLConfig::with_uniform_kappa(3, kappa, 7);
            config.episodes = 4000;
            let (table, _) = train(&plant, &dap, &bucketizer, &config).unwrap();
            let report = evaluate(
                &table,
                &dap,
                &flat_series(0.0, 8),
                &bucketizer,
                &plant,
                &EvalOptions::default(),
            )
            .unwrap();
            if expect_starts {
                assert!(report.startups > 0, "kappa {kappa} should start cycles");
                assert!(report.profit > 0.0);
            } else {
                assert_eq!(report.startups, 0, "kappa {kappa} must idle");
                assert_eq!(report.profit, 0.0);
            }
        }
    }

    #[test]
    fn evaluation_settles_on_rtp_and_replays() {
        let plant = presets::homogeneous_three();
        let (dap, rtp) = synth_prices(5, 16, &SynthProfile::default());
        let bucketizer = crate::prices::fit_bucketizer(&dap).unwrap();
        let mut config = RLConfig::with_uniform_kappa(3, 13.0, 3);
        config.episodes = 120;
        let (table, trace) = train(&plant, &dap, &bucketizer, &config).unwrap();
        assert_eq!(trace.len(), 120 * STEPS_PER_DAY);

        let report = evaluate(&table, &dap, &rtp, &bucketizer, &plant, &EvalOptions::default())
            .unwrap();
        // The profit column must be recomputable from flows at RTP prices.
        assert!(report.log.replay_profit_discrepancy(&plant.units) < 1e-9);
        for (t, step) in report.log.steps.iter().enumerate() {
            assert_eq!(step.price, rtp.values[t]);
        }
        // A never-started policy makes exactly zero.
        let fresh = QTable::new(3);
        let idle_report = evaluate(
            &fresh,
            &dap,
            &rtp,
            &bucketizer,
            &plant,
            &EvalOptions {
                lookahead_tiebreak: false,
            },
        )
        .unwrap();
        assert_eq!(idle_report.startups, 0);
        assert_eq!(idle_report.profit, 0.0);
        assert_eq!(idle_report.utilization, 0.0);
    }

    #[test]
    fn determinism_across_runs() {
        let plant = presets::homogeneous_three();
        let (dap, rtp) = synth_prices(9, 10, &SynthProfile::default());
        let bucketizer = crate::prices::fit_bucketizer(&dap).unwrap();
        let mut config = RLConfig::with_uniform_kappa(3, 13.0, 11);
        config.episodes = 40;
        let (t1, tr1) = train(&plant, &dap, &bucketizer, &config).unwrap();
        let (t2, tr2) = train(&plant, &dap, &bucketizer, &config).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(tr1, tr2);
        let r1 = evaluate(&t1, &dap, &rtp, &bucketizer, &plant, &EvalOptions::default()).unwrap();
        let r2 = evaluate(&t2, &dap, &rtp, &bucketizer, &plant, &EvalOptions::default()).unwrap();
        assert_eq!(r1.log, r2.log);
    }

    #[test]
    fn td_stats_median_behaviour() {
        let stats = td_trace_stats(&vec![2.0; 100], 9).unwrap();
        assert!(stats.iter().all(|&v| (v - 2.0).abs() < 1e-12));

        let mut spiky = vec![0.0; 99];
        spiky[50] = 100.0;
        let stats = td_trace_stats(&spiky, 9).unwrap();
        assert!(stats.iter().all(|&v| v == 0.0));

        assert!(matches!(
            td_trace_stats(&[1.0, 2.0], 9),
            Err(QlError::TraceTooShort)
        ));
    }

    #[test]
    fn qtable_save_load_round_trip() {
        let plant = presets::homogeneous_three();
        let dap = flat_series(0.0, 8);
        let mut config = RLConfig::with_uniform_kappa(3, 16.0, 2);
        config.episodes = 20;
        let (table, _) = train(&plant, &dap, &flat_bucketizer(), &config).unwrap();
        let dir = std::env::temp_dir().join("eaf_qtable_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("table.txt");
        table.save(&path).unwrap();
        let loaded = QTable::load(&path).unwrap();
        assert_eq!(table, loaded);
    }
}
