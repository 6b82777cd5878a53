//! Window MILP construction and the embedded branch-and-bound solver.
//!
//! [`build_window`] instantiates the furnace scheduling program over a
//! price window with boundary coupling to the previous window's terminal
//! state. [`solve_mip`] runs best-first branch-and-bound over the LP
//! relaxation, warm-restarting each node with the dual simplex from the
//! root basis. [`mps`] exports instances for external cross-checks.

pub mod branch;
pub mod mps;

pub use branch::{solve_mip, MipOptions, MipSolution, MipStatus};

use crate::lp::{Model, RowSense, VarKind};
use crate::plant::{FurnaceState, ModelVariant, PlantConfig};
use thiserror::Error;

/// Role of one column in the window program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    On,
    Melting,
    Startup,
    TapRate,
    MeltRate,
    Input,
    Molten,
    Solid,
    Power,
}

impl VarRole {
    pub const COUNT: usize = 9;

    fn all() -> [VarRole; 9] {
        [
            VarRole::On,
            VarRole::Melting,
            VarRole::Startup,
            VarRole::TapRate,
            VarRole::MeltRate,
            VarRole::Input,
            VarRole::Molten,
            VarRole::Solid,
            VarRole::Power,
        ]
    }

    fn tag(&self) -> &'static str {
        match self {
            VarRole::On => "u",
            VarRole::Melting => "v",
            VarRole::Startup => "y",
            VarRole::TapRate => "r",
            VarRole::MeltRate => "k",
            VarRole::Input => "i",
            VarRole::Molten => "m",
            VarRole::Solid => "s",
            VarRole::Power => "p",
        }
    }
}

/// Column metadata parallel to the model's variable table.
#[derive(Debug, Clone, Copy)]
pub struct VarRef {
    pub unit: u16,
    pub step: u16,
    pub role: VarRole,
}

/// One rolling window's MILP instance.
#[derive(Debug, Clone)]
pub struct WindowModel {
    pub model: Model,
    pub var_refs: Vec<VarRef>,
    pub unit_count: usize,
    pub horizon: usize,
    pub variant: ModelVariant,
    /// Unit parameters and caps the window was built from; the solver's
    /// primal heuristics lean on these.
    pub units: Vec<crate::plant::FurnaceParams>,
    pub power_cap: f64,
    pub feed_cap: Option<f64>,
    /// Price per step, as priced into the objective.
    pub prices: Vec<f64>,
    /// One primal-feasible basic column per row (stock/power/input columns
    /// on the balance rows, slacks elsewhere). The all-idle point this
    /// basis describes is feasible for every window built from a valid
    /// boundary, so the root LP never needs a phase-1 pass.
    pub structural_basis: Vec<u32>,
}

impl WindowModel {
    /// Column index of `(step, unit, role)`.
    pub fn var(&self, step: usize, unit: usize, role: VarRole) -> usize {
        debug_assert!(step < self.horizon && unit < self.unit_count);
        (step * self.unit_count + unit) * VarRole::COUNT + role_offset(role)
    }
}

fn role_offset(role: VarRole) -> usize {
    match role {
        VarRole::On => 0,
        VarRole::Melting => 1,
        VarRole::Startup => 2,
        VarRole::TapRate => 3,
        VarRole::MeltRate => 4,
        VarRole::Input => 5,
        VarRole::Molten => 6,
        VarRole::Solid => 7,
        VarRole::Power => 8,
    }
}

/// Build options beyond what the plant itself pins down.
#[derive(Debug, Clone, Copy)]
pub struct WindowOptions {
    /// Add the `v <= u` coupling row (melting only while on). On by
    /// default; transcription tests may disable it.
    pub couple_melt_to_on: bool,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            couple_melt_to_on: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("window has no steps")]
    EmptyWindow,
    #[error("boundary has {got} unit states, plant has {expected}")]
    BoundaryMismatch { got: usize, expected: usize },
    #[error("invalid boundary for unit {unit}: {detail}")]
    InvalidBoundary { unit: usize, detail: String },
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
}

/// Rows generated per unit-step; the constraint count of a window is
/// `units * steps * PER_UNIT_STEP_ROWS + steps * (1 + has_feed_cap)` when
/// the `v <= u` coupling is on, one fewer per unit-step otherwise.
pub const PER_UNIT_STEP_ROWS: usize = 10;

/// An all-idle boundary (cold start of the full problem).
pub fn idle_boundary(unit_count: usize) -> Vec<FurnaceState> {
    vec![FurnaceState::default(); unit_count]
}

/// Instantiate the window MILP over `prices` (one entry per step) starting
/// from `boundary`. Variables are laid out step-major, unit-minor, nine
/// per unit-step; binaries are the stage and startup flags.
pub fn build_window(
    plant: &PlantConfig,
    prices: &[f64],
    boundary: &[FurnaceState],
    options: &WindowOptions,
) -> Result<WindowModel, MilpError> {
    let n = plant.units.len();
    let horizon = prices.len();
    if horizon == 0 {
        return Err(MilpError::EmptyWindow);
    }
    if boundary.len() != n {
        return Err(MilpError::BoundaryMismatch {
            got: boundary.len(),
            expected: n,
        });
    }
    for (i, b) in boundary.iter().enumerate() {
        if b.molten < 0.0 || b.solid < 0.0 || b.last_tap < 0.0 || b.last_melt < 0.0 {
            return Err(MilpError::InvalidBoundary {
                unit: i,
                detail: "negative stock or rate".into(),
            });
        }
        if b.melting && !b.on {
            return Err(MilpError::InvalidBoundary {
                unit: i,
                detail: "melting flag without on flag".into(),
            });
        }
    }

    let mut model = Model::default();
    let mut var_refs = Vec::with_capacity(n * horizon * VarRole::COUNT);

    for t in 0..horizon {
        for (i, params) in plant.units.iter().enumerate() {
            let stock_ub = boundary[i].molten + boundary[i].solid
                + params.batch_size * horizon as f64;
            for role in VarRole::all() {
                let name = format!("{}{}_{}", role.tag(), i, t);
                let (kind, lo, hi, obj) = match role {
                    VarRole::On => (VarKind::Binary, 0.0, 1.0, 0.0),
                    VarRole::Melting => (VarKind::Binary, 0.0, 1.0, 0.0),
                    VarRole::Startup => (VarKind::Binary, 0.0, 1.0, -params.startup_cost),
                    VarRole::TapRate => (
                        VarKind::Continuous,
                        0.0,
                        params.max_tap_rate,
                        params.sell_price * params.yield_frac,
                    ),
                    VarRole::MeltRate => (VarKind::Continuous, 0.0, params.max_melt_rate, 0.0),
                    VarRole::Input => (
                        VarKind::Continuous,
                        0.0,
                        params.batch_size,
                        -params.proc_cost,
                    ),
                    VarRole::Molten => (VarKind::Continuous, 0.0, stock_ub, 0.0),
                    VarRole::Solid => (VarKind::Continuous, 0.0, stock_ub, 0.0),
                    VarRole::Power => (VarKind::Continuous, 0.0, params.full_load(), -prices[t]),
                };
                model.add_var(name, kind, lo, hi, obj);
                var_refs.push(VarRef {
                    unit: i as u16,
                    step: t as u16,
                    role,
                });
            }
        }
    }

    let window = WindowModel {
        model,
        var_refs,
        unit_count: n,
        horizon,
        variant: plant.variant,
        units: plant.units.clone(),
        power_cap: plant.power_cap,
        feed_cap: plant.feed_cap,
        prices: prices.to_vec(),
        structural_basis: Vec::new(),
    };
    let mut model = window.model;
    let mut basis: Vec<u32> = Vec::new();
    let n_struct = model.vars.len();
    let idx = |t: usize, i: usize, role: VarRole| -> usize {
        (t * n + i) * VarRole::COUNT + role_offset(role)
    };

    for t in 0..horizon {
        for (i, params) in plant.units.iter().enumerate() {
            let u = idx(t, i, VarRole::On);
            let v = idx(t, i, VarRole::Melting);
            let y = idx(t, i, VarRole::Startup);
            let r = idx(t, i, VarRole::TapRate);
            let k = idx(t, i, VarRole::MeltRate);
            let inp = idx(t, i, VarRole::Input);
            let m = idx(t, i, VarRole::Molten);
            let s = idx(t, i, VarRole::Solid);
            let p = idx(t, i, VarRole::Power);
            let b = &boundary[i];

            // Two-stage power definition.
            let row = model.add_row(
                format!("pd{i}_{t}"),
                vec![
                    (p, 1.0),
                    (u, -params.base_energy),
                    (v, -params.melt_energy),
                ],
                RowSense::Eq,
                0.0,
            );
            basis.push(p as u32);
            debug_assert_eq!(row + 1, basis.len());

            // Startup only from an idle previous step.
            if t == 0 {
                let prev = (b.on as u8 + b.melting as u8) as f64;
                model.add_row(format!("su{i}_{t}"), vec![(y, 2.0)], RowSense::Le, 2.0 - prev);
            } else {
                let up = idx(t - 1, i, VarRole::On);
                let vp = idx(t - 1, i, VarRole::Melting);
                model.add_row(
                    format!("su{i}_{t}"),
                    vec![(y, 2.0), (up, 1.0), (vp, 1.0)],
                    RowSense::Le,
                    2.0,
                );
            }
            basis.push((n_struct + basis.len()) as u32);

            // Rate caps tied to the stage indicators.
            model.add_row(
                format!("rr{i}_{t}"),
                vec![(r, 1.0), (u, -params.max_tap_rate)],
                RowSense::Le,
                0.0,
            );
            basis.push((n_struct + basis.len()) as u32);
            model.add_row(
                format!("rk{i}_{t}"),
                vec![(k, 1.0), (v, -params.max_melt_rate)],
                RowSense::Le,
                0.0,
            );
            basis.push((n_struct + basis.len()) as u32);

            // Stock limits on this step's rates, variant dependent.
            let (tap_stock, melt_stock) = match plant.variant {
                ModelVariant::AsWritten => (s, m),
                ModelVariant::Physical => (m, s),
            };
            model.add_row(
                format!("lr{i}_{t}"),
                vec![(r, 1.0), (tap_stock, -1.0)],
                RowSense::Le,
                0.0,
            );
            basis.push((n_struct + basis.len()) as u32);
            model.add_row(
                format!("lk{i}_{t}"),
                vec![(k, 1.0), (melt_stock, -1.0)],
                RowSense::Le,
                0.0,
            );
            basis.push((n_struct + basis.len()) as u32);

            // Batch charging.
            model.add_row(
                format!("iy{i}_{t}"),
                vec![(inp, 1.0), (y, -params.batch_size)],
                RowSense::Eq,
                0.0,
            );
            basis.push(inp as u32);

            // Stock balances with the one-step consumption lag.
            match plant.variant {
                ModelVariant::AsWritten => {
                    if t == 0 {
                        model.add_row(
                            format!("mb{i}_{t}"),
                            vec![(m, 1.0), (inp, -1.0)],
                            RowSense::Eq,
                            b.molten - b.last_melt,
                        );
                    } else {
                        let mp = idx(t - 1, i, VarRole::Molten);
                        let kp = idx(t - 1, i, VarRole::MeltRate);
                        model.add_row(
                            format!("mb{i}_{t}"),
                            vec![(m, 1.0), (mp, -1.0), (inp, -1.0), (kp, 1.0)],
                            RowSense::Eq,
                            0.0,
                        );
                    }
                    basis.push(m as u32);
                    if t == 0 {
                        model.add_row(
                            format!("sb{i}_{t}"),
                            vec![(s, 1.0), (inp, -1.0)],
                            RowSense::Eq,
                            b.solid - b.last_tap,
                        );
                    } else {
                        let sp = idx(t - 1, i, VarRole::Solid);
                        let rp = idx(t - 1, i, VarRole::TapRate);
                        model.add_row(
                            format!("sb{i}_{t}"),
                            vec![(s, 1.0), (sp, -1.0), (inp, -1.0), (rp, 1.0)],
                            RowSense::Eq,
                            0.0,
                        );
                    }
                    basis.push(s as u32);
                }
                ModelVariant::Physical => {
                    if t == 0 {
                        model.add_row(
                            format!("mb{i}_{t}"),
                            vec![(m, 1.0)],
                            RowSense::Eq,
                            b.molten + b.last_melt - b.last_tap,
                        );
                    } else {
                        let mp = idx(t - 1, i, VarRole::Molten);
                        let kp = idx(t - 1, i, VarRole::MeltRate);
                        let rp = idx(t - 1, i, VarRole::TapRate);
                        model.add_row(
                            format!("mb{i}_{t}"),
                            vec![(m, 1.0), (mp, -1.0), (kp, -1.0), (rp, 1.0)],
                            RowSense::Eq,
                            0.0,
                        );
                    }
                    basis.push(m as u32);
                    if t == 0 {
                        model.add_row(
                            format!("sb{i}_{t}"),
                            vec![(s, 1.0), (inp, -1.0)],
                            RowSense::Eq,
                            b.solid - b.last_melt,
                        );
                    } else {
                        let sp = idx(t - 1, i, VarRole::Solid);
                        let kp = idx(t - 1, i, VarRole::MeltRate);
                        model.add_row(
                            format!("sb{i}_{t}"),
                            vec![(s, 1.0), (sp, -1.0), (inp, -1.0), (kp, 1.0)],
                            RowSense::Eq,
                            0.0,
                        );
                    }
                    basis.push(s as u32);
                }
            }

            // Melting only while on.
            if options.couple_melt_to_on {
                model.add_row(
                    format!("vu{i}_{t}"),
                    vec![(v, 1.0), (u, -1.0)],
                    RowSense::Le,
                    0.0,
                );
                basis.push((n_struct + basis.len()) as u32);
            }
        }

        // Shared feeder cap on total instantaneous power.
        let coeffs: Vec<(usize, f64)> = (0..n).map(|i| (idx(t, i, VarRole::Power), 1.0)).collect();
        model.add_row(format!("cap_{t}"), coeffs, RowSense::Le, plant.power_cap);
        basis.push((n_struct + basis.len()) as u32);

        if let Some(feed) = plant.feed_cap {
            let coeffs: Vec<(usize, f64)> =
                (0..n).map(|i| (idx(t, i, VarRole::Input), 1.0)).collect();
            model.add_row(format!("fd_{t}"), coeffs, RowSense::Le, feed);
            basis.push((n_struct + basis.len()) as u32);
        }
    }

    Ok(WindowModel {
        model,
        var_refs: window.var_refs,
        unit_count: n,
        horizon,
        variant: plant.variant,
        units: window.units,
        power_cap: window.power_cap,
        feed_cap: window.feed_cap,
        prices: window.prices,
        structural_basis: basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, LpOutcome};
    use crate::plant::presets;

    #[test]
    fn variable_and_row_counts() {
        let plant = presets::homogeneous_three();
        let prices = vec![40.0; 48];
        let w = build_window(&plant, &prices, &idle_boundary(3), &WindowOptions::default())
            .unwrap();
        assert_eq!(w.model.vars.len(), 3 * 48 * 9);
        assert_eq!(w.model.vars.len(), 1296);
        assert_eq!(w.model.binary_indices().len(), 432);
        assert_eq!(w.model.rows.len(), 3 * 48 * PER_UNIT_STEP_ROWS + 48);
        assert_eq!(w.structural_basis.len(), w.model.rows.len());
    }

    #[test]
    fn first_step_startup_bound_follows_boundary() {
        let mut plant = presets::homogeneous_three();
        plant.units.truncate(1);
        let w = build_window(&plant, &[40.0], &idle_boundary(1), &WindowOptions::default())
            .unwrap();
        // Idle boundary: 2y <= 2, so y can reach 1.
        let su = w
            .model
            .rows
            .iter()
            .find(|r| r.name == "su0_0")
            .expect("startup row");
        assert_eq!(su.rhs, 2.0);

        let busy = vec![FurnaceState {
            on: true,
            melting: true,
            ..FurnaceState::default()
        }];
        let w = build_window(&plant, &[40.0], &busy, &WindowOptions::default()).unwrap();
        let su = w.model.rows.iter().find(|r| r.name == "su0_0").unwrap();
        // 2y <= 0 forces y = 0 at the first step.
        assert_eq!(su.rhs, 0.0);
    }

    #[test]
    fn structural_basis_is_feasible_and_idle_costs_nothing() {
        let plant = presets::homogeneous_three();
        let prices = vec![1e9; 8];
        let w = build_window(&plant, &prices, &idle_boundary(3), &WindowOptions::default())
            .unwrap();
        // Prohibitive prices: LP optimum is the all-idle plan at objective 0.
        match solve_lp(&w.model).unwrap() {
            LpOutcome::Optimal(s) => {
                assert!(s.objective.abs() < 1e-6, "objective {}", s.objective);
            }
            LpOutcome::Infeasible { rows } => panic!("infeasible rows {rows:?}"),
        }
    }

    #[test]
    fn boundary_with_melting_off_unit_is_rejected() {
        let mut plant = presets::homogeneous_three();
        plant.units.truncate(1);
        let bad = vec![FurnaceState {
            melting: true,
            on: false,
            ..FurnaceState::default()
        }];
        assert!(matches!(
            build_window(&plant, &[40.0], &bad, &WindowOptions::default()),
            Err(MilpError::InvalidBoundary { .. })
        ));
    }
}
