//! Bounded-variable revised simplex with a product-form basis inverse.
//!
//! The engine solves `min c'x, Ax = b, l <= x <= u` after standardizing a
//! [`Model`] (one slack column per row, objective negated from the model's
//! maximization sense). Three iteration modes share the factorization
//! machinery:
//!
//! * primal simplex (Dantzig pricing, Bland's rule engaged on degenerate
//!   stalls) for cold solves and final cleanup,
//! * dual simplex with incrementally maintained reduced costs for warm
//!   restarts after bound changes, which is how the branch-and-bound
//!   re-solves node relaxations,
//! * a phase-1 pass with artificial columns when no feasible basis is known.
//!
//! Eta transformations live in one flat arena so that basis snapshots are
//! plain buffer copies. All tie-breaking is by lowest index, so solves are
//! deterministic.

use super::{LpError, LpOutcome, LpSolution, Model, RowSense};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Bound/row feasibility tolerance.
    pub feas_tol: f64,
    /// Reduced-cost optimality tolerance.
    pub cost_tol: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    pub max_iterations: usize,
    /// Update pivots between refactorizations of the basis inverse.
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            cost_tol: 1e-7,
            pivot_tol: 1e-8,
            max_iterations: 500_000,
            refactor_every: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VStat {
    Basic,
    AtLower,
    AtUpper,
}

/// Eta file in arena form. Eta `k` transforms a vector by
/// `v[row[k]] /= pivot[k]` followed by `v[i] -= w_i * v[row[k]]` over its
/// off-pivot entries.
#[derive(Debug, Clone, Default)]
struct EtaFile {
    pivot_row: Vec<u32>,
    pivot_val: Vec<f64>,
    /// Entry ranges into `idx`/`val`, one per eta.
    start: Vec<u32>,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl EtaFile {
    fn clear(&mut self) {
        self.pivot_row.clear();
        self.pivot_val.clear();
        self.start.clear();
        self.idx.clear();
        self.val.clear();
    }

    fn len(&self) -> usize {
        self.pivot_row.len()
    }

    fn push(&mut self, row: u32, pivot: f64, entries: impl Iterator<Item = (u32, f64)>) {
        self.pivot_row.push(row);
        self.pivot_val.push(pivot);
        self.start.push(self.idx.len() as u32);
        for (i, v) in entries {
            self.idx.push(i);
            self.val.push(v);
        }
    }

    fn range(&self, k: usize) -> std::ops::Range<usize> {
        let lo = self.start[k] as usize;
        let hi = if k + 1 < self.start.len() {
            self.start[k + 1] as usize
        } else {
            self.idx.len()
        };
        lo..hi
    }

    /// `v <- B^-1 v`. Skips etas whose pivot component is zero, so sparse
    /// inputs stay cheap.
    fn ftran(&self, v: &mut [f64]) {
        for k in 0..self.len() {
            let r = self.pivot_row[k] as usize;
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            let scaled = vr / self.pivot_val[k];
            v[r] = scaled;
            for t in self.range(k) {
                v[self.idx[t] as usize] -= self.val[t] * scaled;
            }
        }
    }

    /// [`EtaFile::ftran`] that records every index it writes into
    /// `touched` (with possible duplicates), so callers can stay
    /// fill-proportional instead of scanning the whole vector.
    fn ftran_tracked(&self, v: &mut [f64], touched: &mut Vec<u32>) {
        for k in 0..self.len() {
            let r = self.pivot_row[k] as usize;
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            let scaled = vr / self.pivot_val[k];
            v[r] = scaled;
            for t in self.range(k) {
                let i = self.idx[t] as usize;
                if v[i] == 0.0 {
                    touched.push(self.idx[t]);
                }
                v[i] -= self.val[t] * scaled;
            }
        }
    }

    /// `v <- B^-T v`.
    fn btran(&self, v: &mut [f64]) {
        for k in (0..self.len()).rev() {
            let r = self.pivot_row[k] as usize;
            let mut acc = v[r];
            for t in self.range(k) {
                acc -= self.val[t] * v[self.idx[t] as usize];
            }
            v[r] = acc / self.pivot_val[k];
        }
    }

    fn clone_from_other(&mut self, other: &EtaFile) {
        self.pivot_row.clear();
        self.pivot_row.extend_from_slice(&other.pivot_row);
        self.pivot_val.clear();
        self.pivot_val.extend_from_slice(&other.pivot_val);
        self.start.clear();
        self.start.extend_from_slice(&other.start);
        self.idx.clear();
        self.idx.extend_from_slice(&other.idx);
        self.val.clear();
        self.val.extend_from_slice(&other.val);
    }
}

/// Basis state sufficient to restart the engine without refactorizing.
#[derive(Debug, Clone)]
pub struct BasisSnapshot {
    basic: Vec<u32>,
    vstat: Vec<VStat>,
    etas: EtaFile,
    pivots_since_refactor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineOutcome {
    Optimal,
    /// Model row indices certifying infeasibility.
    Infeasible(Vec<usize>),
}

enum DualEnd {
    PrimalFeasible,
    Infeasible(usize),
}

pub struct SimplexEngine {
    m: usize,
    n_struct: usize,
    /// Sparse columns: structural, then one slack per row, then any phase-1
    /// artificials appended by a cold start.
    cols: Vec<Vec<(u32, f64)>>,
    /// Phase-2 cost (minimization sense).
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    orig_lower: Vec<f64>,
    orig_upper: Vec<f64>,
    rhs: Vec<f64>,

    basic: Vec<u32>,
    vstat: Vec<VStat>,
    x: Vec<f64>,
    etas: EtaFile,
    pivots_since_refactor: usize,
    pub iterations: usize,

    opts: SimplexOptions,
    /// Columns added as phase-1 artificials, pinned to [0, 0] afterwards.
    artificial_from: usize,
    /// Row-visit stamps for deduplicating tracked-fill index lists.
    row_stamp: Vec<u32>,
    stamp: u32,
}

impl SimplexEngine {
    pub fn new(model: &Model, opts: SimplexOptions) -> Self {
        let m = model.rows.len();
        let n_struct = model.vars.len();
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_struct + m];
        for (r, row) in model.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((r as u32, a));
                }
            }
            cols[n_struct + r].push((r as u32, 1.0));
        }
        let mut cost = vec![0.0; n_struct + m];
        let mut lower = vec![0.0; n_struct + m];
        let mut upper = vec![0.0; n_struct + m];
        for (j, v) in model.vars.iter().enumerate() {
            // Minimization internally; the model maximizes.
            cost[j] = -v.objective;
            lower[j] = v.lower;
            upper[j] = v.upper;
        }
        for (r, row) in model.rows.iter().enumerate() {
            let (lo, hi) = match row.sense {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Eq => (0.0, 0.0),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lower[n_struct + r] = lo;
            upper[n_struct + r] = hi;
        }
        let rhs = model.rows.iter().map(|r| r.rhs).collect();
        let n = n_struct + m;
        Self {
            m,
            n_struct,
            cols,
            cost,
            orig_lower: lower.clone(),
            orig_upper: upper.clone(),
            lower,
            upper,
            rhs,
            basic: vec![0; m],
            vstat: vec![VStat::AtLower; n],
            x: vec![0.0; n],
            etas: EtaFile::default(),
            pivots_since_refactor: 0,
            iterations: 0,
            opts,
            artificial_from: n,
            row_stamp: vec![0; m],
            stamp: 0,
        }
    }

    /// Deduplicate a tracked index list in place using the row stamps.
    fn dedupe_rows(&mut self, touched: &mut Vec<u32>) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.row_stamp.iter_mut().for_each(|s| *s = u32::MAX);
            self.stamp = 1;
        }
        let cur = self.stamp;
        touched.retain(|&i| {
            let r = i as usize;
            if self.row_stamp[r] == cur {
                false
            } else {
                self.row_stamp[r] = cur;
                true
            }
        });
    }

    pub fn struct_count(&self) -> usize {
        self.n_struct
    }

    /// Column index of the slack attached to `row`.
    pub fn slack_col(&self, row: usize) -> usize {
        self.n_struct + row
    }

    pub fn set_var_bounds(&mut self, col: usize, lo: f64, hi: f64) {
        self.lower[col] = lo;
        self.upper[col] = hi;
    }

    pub fn reset_var_bounds(&mut self, col: usize) {
        self.lower[col] = self.orig_lower[col];
        self.upper[col] = self.orig_upper[col];
    }

    /// Make the current bounds of `col` permanent: later resets restore to
    /// these values. Used for root-level variable fixing.
    pub fn pin_var_bounds(&mut self, col: usize) {
        self.orig_lower[col] = self.lower[col];
        self.orig_upper[col] = self.upper[col];
    }

    pub fn struct_values(&self) -> Vec<f64> {
        self.x[..self.n_struct].to_vec()
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            basic: self.basic.clone(),
            vstat: self.vstat.clone(),
            etas: self.etas.clone(),
            pivots_since_refactor: self.pivots_since_refactor,
        }
    }

    fn bounds_cross(&self) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .any(|(&l, &u)| l > u + self.opts.feas_tol)
    }

    /// Natural resting value for a nonbasic column under its status.
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.vstat[j] {
            VStat::AtLower => {
                if self.lower[j].is_finite() {
                    self.lower[j]
                } else if self.upper[j].is_finite() {
                    self.upper[j]
                } else {
                    0.0
                }
            }
            VStat::AtUpper => {
                if self.upper[j].is_finite() {
                    self.upper[j]
                } else if self.lower[j].is_finite() {
                    self.lower[j]
                } else {
                    0.0
                }
            }
            VStat::Basic => unreachable!("nonbasic_value on basic column"),
        }
    }

    /// Make a nonbasic status point at a finite bound where possible.
    fn normalize_status(&mut self, j: usize) {
        if self.vstat[j] == VStat::Basic {
            return;
        }
        let finite_lo = self.lower[j].is_finite();
        let finite_hi = self.upper[j].is_finite();
        self.vstat[j] = match (self.vstat[j], finite_lo, finite_hi) {
            (VStat::AtLower, false, true) => VStat::AtUpper,
            (VStat::AtUpper, true, false) => VStat::AtLower,
            (s, _, _) => s,
        };
    }

    // ------------------------------------------------------------------
    // Factorization
    // ------------------------------------------------------------------

    /// FTRAN one original column into `w`, leaving the touched (deduped)
    /// row list in `touched`. `w` must be all zeros on entry; callers zero
    /// it again afterwards via `touched`.
    fn load_column(&mut self, col: usize, w: &mut [f64], touched: &mut Vec<u32>) {
        touched.clear();
        for &(i, a) in &self.cols[col] {
            w[i as usize] = a;
            touched.push(i);
        }
        let etas = std::mem::take(&mut self.etas);
        etas.ftran_tracked(w, touched);
        self.etas = etas;
        self.dedupe_rows(touched);
    }

    fn clear_tracked(w: &mut [f64], touched: &[u32]) {
        for &i in touched {
            w[i as usize] = 0.0;
        }
    }

    /// Rebuild the eta file from the current basic set, choosing pivot rows
    /// by partial pivoting. Columns are processed sparsest-first, which
    /// keeps fill near zero on the staircase bases these models produce.
    fn factorize(&mut self) -> Result<(), LpError> {
        let mut etas = std::mem::take(&mut self.etas);
        etas.clear();
        self.pivots_since_refactor = 0;
        let mut order: Vec<u32> = self.basic.clone();
        order.sort_by_key(|&c| (self.cols[c as usize].len(), c));
        debug_assert!(
            {
                let mut o = order.clone();
                o.sort_unstable();
                o.windows(2).all(|p| p[0] != p[1])
            },
            "duplicate column in basis"
        );

        let mut assigned = vec![false; self.m];
        let mut new_basic = vec![u32::MAX; self.m];
        let mut deferred: Vec<u32> = Vec::new();
        let mut w = vec![0.0; self.m];
        let mut touched: Vec<u32> = Vec::new();

        let mut process = |engine: &mut Self,
                           etas: &mut EtaFile,
                           col: u32,
                           assigned: &mut [bool],
                           new_basic: &mut [u32],
                           w: &mut [f64],
                           touched: &mut Vec<u32>|
         -> bool {
            touched.clear();
            for &(i, a) in &engine.cols[col as usize] {
                w[i as usize] = a;
                touched.push(i);
            }
            etas.ftran_tracked(w, touched);
            engine.dedupe_rows(touched);
            let mut best = usize::MAX;
            let mut best_mag = 1e-10;
            for &iu in touched.iter() {
                let i = iu as usize;
                if !assigned[i] && w[i].abs() > best_mag {
                    best_mag = w[i].abs();
                    best = i;
                }
            }
            if best == usize::MAX {
                Self::clear_tracked(w, touched);
                return false;
            }
            etas.push(
                best as u32,
                w[best],
                touched
                    .iter()
                    .map(|&i| i as usize)
                    .filter(|&i| i != best && w[i].abs() > 1e-13)
                    .map(|i| (i as u32, w[i])),
            );
            assigned[best] = true;
            new_basic[best] = col;
            Self::clear_tracked(w, touched);
            true
        };

        for col in order {
            if !process(
                self,
                &mut etas,
                col,
                &mut assigned,
                &mut new_basic,
                &mut w,
                &mut touched,
            ) {
                deferred.push(col);
            }
        }
        // A greedy pivot order can starve a column of rows temporarily;
        // retry deferred columns until a full pass makes no progress.
        while !deferred.is_empty() {
            let before = deferred.len();
            let mut still: Vec<u32> = Vec::new();
            for col in deferred {
                if !process(
                    self,
                    &mut etas,
                    col,
                    &mut assigned,
                    &mut new_basic,
                    &mut w,
                    &mut touched,
                ) {
                    still.push(col);
                }
            }
            if still.len() == before {
                self.etas = etas;
                return Err(LpError::SingularBasis);
            }
            deferred = still;
        }
        // Pivot-row choice may reassign which row each basic column owns.
        self.basic.copy_from_slice(&new_basic);
        self.etas = etas;
        Ok(())
    }

    /// Recompute all variable values from statuses: nonbasic at bounds,
    /// basic from `B^-1 (b - N x_N)`.
    fn compute_x(&mut self) {
        let mut rhs = self.rhs.clone();
        for j in 0..self.cols.len() {
            if self.vstat[j] == VStat::Basic {
                continue;
            }
            let xj = self.nonbasic_value(j);
            self.x[j] = xj;
            if xj != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i as usize] -= a * xj;
                }
            }
        }
        self.etas.ftran(&mut rhs);
        for r in 0..self.m {
            self.x[self.basic[r] as usize] = rhs[r];
        }
    }

    fn refactor_and_recompute(&mut self) -> Result<(), LpError> {
        self.factorize()?;
        self.compute_x();
        Ok(())
    }

    fn primal_infeasibility(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.m {
            let j = self.basic[r] as usize;
            let v = self.x[j];
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    /// Reduced costs for all columns under `cost`; basic entries are set to
    /// zero.
    fn reduced_costs(&self, cost: &[f64], d: &mut Vec<f64>) {
        let mut y = vec![0.0; self.m];
        for r in 0..self.m {
            y[r] = cost[self.basic[r] as usize];
        }
        self.etas.btran(&mut y);
        d.clear();
        d.resize(self.cols.len(), 0.0);
        for (j, col) in self.cols.iter().enumerate() {
            if self.vstat[j] == VStat::Basic {
                continue;
            }
            let mut dj = cost[j];
            for &(i, a) in col {
                dj -= y[i as usize] * a;
            }
            d[j] = dj;
        }
    }

    // ------------------------------------------------------------------
    // Primal simplex
    // ------------------------------------------------------------------

    fn primal(&mut self, cost: &[f64]) -> Result<(), LpError> {
        let mut d: Vec<f64> = Vec::new();
        let mut w = vec![0.0; self.m];
        let mut touched: Vec<u32> = Vec::new();
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut local_iters = 0usize;

        loop {
            self.iterations += 1;
            local_iters += 1;
            if local_iters > self.opts.max_iterations {
                return Err(LpError::IterationLimit);
            }

            self.reduced_costs(cost, &mut d);

            // Entering column.
            let mut entering = usize::MAX;
            let mut best_viol = self.opts.cost_tol;
            for j in 0..self.cols.len() {
                if self.vstat[j] == VStat::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let viol = match self.vstat[j] {
                    VStat::AtLower => -d[j],
                    VStat::AtUpper => d[j],
                    VStat::Basic => unreachable!(),
                };
                if viol > best_viol {
                    if bland {
                        entering = j;
                        break;
                    }
                    best_viol = viol;
                    entering = j;
                }
            }
            if entering == usize::MAX {
                return Ok(());
            }
            let q = entering;
            let sigma = if self.vstat[q] == VStat::AtLower {
                1.0
            } else {
                -1.0
            };

            self.load_column(q, &mut w, &mut touched);

            // Bounded ratio test; the entering variable's own range competes.
            let own_range = self.upper[q] - self.lower[q];
            let mut t_best = own_range;
            let mut leave: Option<(usize, VStat)> = None; // (row, bound hit)
            let mut leave_mag = 0.0_f64;
            for &ru in &touched {
                let r = ru as usize;
                let wi = w[r];
                let dir = sigma * wi;
                if dir.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let bj = self.basic[r] as usize;
                let (limit, hits) = if dir > 0.0 {
                    if self.lower[bj].is_finite() {
                        ((self.x[bj] - self.lower[bj]) / dir, VStat::AtLower)
                    } else {
                        continue;
                    }
                } else if self.upper[bj].is_finite() {
                    ((self.upper[bj] - self.x[bj]) / (-dir), VStat::AtUpper)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                // Stability window: among limits within a whisker of the
                // minimum, prefer the largest pivot magnitude.
                let window = 1e-9 + 1e-7 * t_best.abs().min(1.0);
                let better = match leave {
                    _ if limit < t_best - window => true,
                    Some((lr, _)) if limit <= t_best + window => {
                        if bland {
                            bj < self.basic[lr] as usize
                        } else {
                            wi.abs() > leave_mag
                        }
                    }
                    None if limit <= t_best + window => true,
                    _ => false,
                };
                if better {
                    t_best = limit.min(t_best);
                    leave = Some((r, hits));
                    leave_mag = wi.abs();
                }
            }

            if !t_best.is_finite() {
                return Err(LpError::Unbounded);
            }

            if t_best <= 1e-10 {
                degenerate_run += 1;
                if degenerate_run >= 64 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            match leave {
                None => {
                    // Bound flip: the entering variable runs to its other bound.
                    for &ru in &touched {
                        let r = ru as usize;
                        if w[r] != 0.0 {
                            self.x[self.basic[r] as usize] -= sigma * t_best * w[r];
                        }
                    }
                    self.x[q] = if sigma > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                    self.vstat[q] = if sigma > 0.0 {
                        VStat::AtUpper
                    } else {
                        VStat::AtLower
                    };
                }
                Some((r, hits)) => {
                    self.pivot(q, sigma, t_best, r, hits, &w, &touched)?;
                }
            }
            Self::clear_tracked(&mut w, &touched);
        }
    }

    /// Apply a basis-changing pivot shared by the primal and dual loops.
    /// `touched` is the (deduplicated) support of `w`.
    fn pivot(
        &mut self,
        q: usize,
        sigma: f64,
        t: f64,
        row: usize,
        leaving_to: VStat,
        w: &[f64],
        touched: &[u32],
    ) -> Result<(), LpError> {
        for &ru in touched {
            let r = ru as usize;
            if w[r] != 0.0 {
                self.x[self.basic[r] as usize] -= sigma * t * w[r];
            }
        }
        self.x[q] = match self.vstat[q] {
            VStat::AtLower => self.lower[q] + sigma * t,
            VStat::AtUpper => self.upper[q] + sigma * t,
            VStat::Basic => self.x[q] + sigma * t,
        };
        let p = self.basic[row] as usize;
        // Pin the leaving variable exactly on its bound to stop drift.
        self.x[p] = match leaving_to {
            VStat::AtLower => self.lower[p],
            VStat::AtUpper => self.upper[p],
            VStat::Basic => unreachable!(),
        };
        self.vstat[p] = leaving_to;
        self.vstat[q] = VStat::Basic;
        self.basic[row] = q as u32;

        self.etas.push(
            row as u32,
            w[row],
            touched
                .iter()
                .map(|&i| i as usize)
                .filter(|&i| i != row && w[i].abs() > 1e-13)
                .map(|i| (i as u32, w[i])),
        );

        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= self.opts.refactor_every {
            self.refactor_and_recompute()?;
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Dual simplex
    // ------------------------------------------------------------------

    fn dual(&mut self, cost: &[f64]) -> Result<DualEnd, LpError> {
        let mut d: Vec<f64> = Vec::new();
        self.reduced_costs(cost, &mut d);
        let mut since_d_refresh = 0usize;
        let mut rho = vec![0.0; self.m];
        let mut w = vec![0.0; self.m];
        let mut touched: Vec<u32> = Vec::new();
        let mut alpha = vec![0.0; self.cols.len()];
        let mut stall_run = 0usize;
        let mut bland = false;
        let mut local_iters = 0usize;

        loop {
            self.iterations += 1;
            local_iters += 1;
            if local_iters > self.opts.max_iterations {
                return Err(LpError::IterationLimit);
            }

            // Leaving row: worst primal bound violation among basics.
            let mut row = usize::MAX;
            let mut worst = self.opts.feas_tol;
            let mut below = false;
            for r in 0..self.m {
                let j = self.basic[r] as usize;
                let under = self.lower[j] - self.x[j];
                let over = self.x[j] - self.upper[j];
                if under > worst {
                    worst = under;
                    row = r;
                    below = true;
                }
                if over > worst {
                    worst = over;
                    row = r;
                    below = false;
                }
            }
            if row == usize::MAX {
                return Ok(DualEnd::PrimalFeasible);
            }

            rho.iter_mut().for_each(|v| *v = 0.0);
            rho[row] = 1.0;
            self.etas.btran(&mut rho);
            for (j, col) in self.cols.iter().enumerate() {
                if self.vstat[j] == VStat::Basic {
                    alpha[j] = 0.0;
                    continue;
                }
                let mut a_j = 0.0;
                for &(i, a) in col {
                    a_j += rho[i as usize] * a;
                }
                alpha[j] = a_j;
            }

            // Dual ratio test over sign-normalized columns.
            let mut entering = usize::MAX;
            let mut best_theta = f64::INFINITY;
            let mut best_mag = 0.0_f64;
            for j in 0..self.cols.len() {
                if self.vstat[j] == VStat::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let sgn = if self.vstat[j] == VStat::AtLower {
                    1.0
                } else {
                    -1.0
                };
                let a_tilde = sgn * alpha[j];
                let eligible = if below {
                    a_tilde < -self.opts.pivot_tol
                } else {
                    a_tilde > self.opts.pivot_tol
                };
                if !eligible {
                    continue;
                }
                let d_tilde = (sgn * d[j]).max(0.0);
                let theta = d_tilde / a_tilde.abs();
                // Stability window as in the primal ratio test.
                let window = 1e-9 + 1e-7 * best_theta.abs().min(1.0);
                let better = if theta < best_theta - window {
                    true
                } else if theta <= best_theta + window && entering != usize::MAX {
                    if bland {
                        j < entering
                    } else {
                        alpha[j].abs() > best_mag
                    }
                } else {
                    entering == usize::MAX && theta.is_finite()
                };
                if better {
                    best_theta = theta.min(best_theta);
                    entering = j;
                    best_mag = alpha[j].abs();
                }
            }
            if entering == usize::MAX {
                return Ok(DualEnd::Infeasible(row));
            }
            let q = entering;

            self.load_column(q, &mut w, &mut touched);
            let wr = w[row];
            if wr.abs() <= self.opts.pivot_tol {
                // Numerical disagreement between rho and the ftran column:
                // refactorize and retry from a clean inverse.
                Self::clear_tracked(&mut w, &touched);
                self.refactor_and_recompute()?;
                self.reduced_costs(cost, &mut d);
                since_d_refresh = 0;
                continue;
            }

            let p = self.basic[row] as usize;
            let (target, leaving_to) = if below {
                (self.lower[p], VStat::AtLower)
            } else {
                (self.upper[p], VStat::AtUpper)
            };
            let sigma = if self.vstat[q] == VStat::AtLower {
                1.0
            } else {
                -1.0
            };
            // x[p] moves by -sigma * t * w[row]; drive it exactly to target.
            let t = ((self.x[p] - target) / (sigma * wr)).max(0.0);

            if t <= 1e-10 {
                stall_run += 1;
                if stall_run >= 64 {
                    bland = true;
                }
            } else {
                stall_run = 0;
                bland = false;
            }

            let refactored_before = self.pivots_since_refactor + 1 >= self.opts.refactor_every;
            let theta_d = d[q] / alpha[q];
            self.pivot(q, sigma, t, row, leaving_to, &w, &touched)?;
            Self::clear_tracked(&mut w, &touched);

            // Incremental reduced-cost update: d_j -= theta * alpha_j for
            // nonbasic j; the leaving column picks up -theta.
            if refactored_before {
                self.reduced_costs(cost, &mut d);
                since_d_refresh = 0;
            } else {
                for j in 0..self.cols.len() {
                    if self.vstat[j] != VStat::Basic && alpha[j] != 0.0 {
                        d[j] -= theta_d * alpha[j];
                    }
                }
                d[q] = 0.0;
                d[p] = -theta_d;
                since_d_refresh += 1;
                if since_d_refresh >= 512 {
                    self.reduced_costs(cost, &mut d);
                    since_d_refresh = 0;
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Entry points
    // ------------------------------------------------------------------

    /// Cold or hinted primal solve. `hint` proposes one basic column per
    /// row; when the hinted basis is primal feasible phase 1 is skipped.
    pub fn solve_primal(&mut self, hint: Option<&[u32]>) -> Result<EngineOutcome, LpError> {
        if self.bounds_cross() {
            return Ok(EngineOutcome::Infeasible(Vec::new()));
        }
        if let Some(basis) = hint {
            debug_assert_eq!(basis.len(), self.m);
            self.basic.copy_from_slice(basis);
            for j in 0..self.cols.len() {
                self.vstat[j] = VStat::AtLower;
                self.normalize_status(j);
            }
            for &c in basis {
                self.vstat[c as usize] = VStat::Basic;
            }
            if self.refactor_and_recompute().is_ok()
                && self.primal_infeasibility() <= self.opts.feas_tol
            {
                let cost = std::mem::take(&mut self.cost);
                let res = self.primal(&cost);
                self.cost = cost;
                match res {
                    Ok(()) => return Ok(EngineOutcome::Optimal),
                    // A numerically degraded basis falls back to the cold
                    // path below, which starts from a trivially
                    // factorizable slack basis.
                    Err(LpError::SingularBasis) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        self.cold_start()
    }

    /// Phase-1/phase-2 solve from the all-slack basis with artificials on
    /// rows the slacks cannot cover.
    fn cold_start(&mut self) -> Result<EngineOutcome, LpError> {
        // Drop artificials from any previous cold start.
        self.cols.truncate(self.artificial_from);
        self.cost.truncate(self.artificial_from);
        self.lower.truncate(self.artificial_from);
        self.upper.truncate(self.artificial_from);
        self.vstat.truncate(self.artificial_from);
        self.x.truncate(self.artificial_from);

        for j in 0..self.n_struct {
            self.vstat[j] = VStat::AtLower;
            self.normalize_status(j);
        }
        // Residual once every structural variable rests on a bound.
        let mut resid = self.rhs.clone();
        for j in 0..self.n_struct {
            let xj = self.nonbasic_value(j);
            if xj != 0.0 {
                for &(i, a) in &self.cols[j] {
                    resid[i as usize] -= a * xj;
                }
            }
        }

        let mut artificial_rows: Vec<usize> = Vec::new();
        for r in 0..self.m {
            let s = self.n_struct + r;
            let within = resid[r] >= self.lower[s] - self.opts.feas_tol
                && resid[r] <= self.upper[s] + self.opts.feas_tol;
            if within {
                self.basic[r] = s as u32;
                self.vstat[s] = VStat::Basic;
            } else {
                self.vstat[s] = VStat::AtLower;
                self.normalize_status(s);
                let sign = if resid[r] - self.nonbasic_value(s) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                let a = self.cols.len();
                self.cols.push(vec![(r as u32, sign)]);
                self.cost.push(0.0);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.vstat.push(VStat::Basic);
                self.x.push(0.0);
                self.basic[r] = a as u32;
                artificial_rows.push(r);
            }
        }

        self.refactor_and_recompute()?;

        if !artificial_rows.is_empty() {
            let mut phase1 = vec![0.0; self.cols.len()];
            for j in self.artificial_from..self.cols.len() {
                phase1[j] = 1.0;
            }
            self.primal(&phase1)?;
            let infeas: f64 = (self.artificial_from..self.cols.len())
                .map(|j| self.x[j])
                .sum();
            if infeas > 1e-6 {
                let mut bad_rows: Vec<usize> = Vec::new();
                for (k, j) in (self.artificial_from..self.cols.len()).enumerate() {
                    if self.x[j] > 1e-6 {
                        bad_rows.push(artificial_rows[k]);
                    }
                }
                return Ok(EngineOutcome::Infeasible(bad_rows));
            }
            // Pin artificials at zero for phase 2.
            for j in self.artificial_from..self.cols.len() {
                self.lower[j] = 0.0;
                self.upper[j] = 0.0;
            }
        }

        let cost = std::mem::take(&mut self.cost);
        let res = self.primal(&cost);
        self.cost = cost;
        res?;
        Ok(EngineOutcome::Optimal)
    }

    /// Restore a basis snapshot (no refactorization) and recompute values
    /// under the current bounds.
    pub fn restore(&mut self, snap: &BasisSnapshot) {
        self.basic.copy_from_slice(&snap.basic);
        let n = snap.vstat.len().min(self.vstat.len());
        self.vstat[..n].copy_from_slice(&snap.vstat[..n]);
        for j in 0..self.cols.len() {
            self.normalize_status(j);
        }
        self.etas.clone_from_other(&snap.etas);
        self.pivots_since_refactor = snap.pivots_since_refactor;
        self.compute_x();
    }

    /// Warm restart after bound changes: restore a dual-feasible basis and
    /// run the dual simplex, then a primal cleanup pass.
    pub fn resolve_dual_from(&mut self, snap: &BasisSnapshot) -> Result<EngineOutcome, LpError> {
        if self.bounds_cross() {
            return Ok(EngineOutcome::Infeasible(Vec::new()));
        }
        self.restore(snap);
        self.resolve_dual_here()
    }

    /// Run the dual simplex from the engine's current basis (which must be
    /// dual feasible), then a primal cleanup pass. A numerically degraded
    /// basis triggers one full cold restart before giving up.
    pub fn resolve_dual_here(&mut self) -> Result<EngineOutcome, LpError> {
        if self.bounds_cross() {
            return Ok(EngineOutcome::Infeasible(Vec::new()));
        }
        self.compute_x();
        let cost = std::mem::take(&mut self.cost);
        let dual_end = self.dual(&cost);
        let res = match dual_end {
            Ok(DualEnd::PrimalFeasible) => match self.primal(&cost) {
                Ok(()) => Ok(EngineOutcome::Optimal),
                Err(LpError::SingularBasis) => Err(LpError::SingularBasis),
                Err(e) => Err(e),
            },
            Ok(DualEnd::Infeasible(row)) => {
                let rows = if row < self.m { vec![row] } else { Vec::new() };
                Ok(EngineOutcome::Infeasible(rows))
            }
            Err(e) => Err(e),
        };
        self.cost = cost;
        match res {
            Err(LpError::SingularBasis) => self.cold_start(),
            other => other,
        }
    }

    /// Objective of the current point in the engine's minimization sense.
    fn min_objective(&self) -> f64 {
        self.cost
            .iter()
            .zip(&self.x)
            .map(|(c, x)| c * x)
            .sum::<f64>()
    }

    /// Objective in the model's maximization sense.
    pub fn max_objective(&self) -> f64 {
        -self.min_objective()
    }

    /// Verify dual feasibility of the current basis under phase-2 costs.
    pub fn dual_feasible(&mut self) -> bool {
        let mut d = Vec::new();
        self.reduced_costs(&self.cost.clone(), &mut d);
        for j in 0..self.cols.len() {
            if self.vstat[j] == VStat::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            let viol = match self.vstat[j] {
                VStat::AtLower => -d[j],
                VStat::AtUpper => d[j],
                VStat::Basic => unreachable!(),
            };
            if viol > 1e-6 {
                return false;
            }
        }
        true
    }

    /// Reduced-cost report for the current (optimal) basis: for each
    /// requested nonbasic column, `(col, at_upper, penalty)` where
    /// `penalty` is the drop in the maximization objective per unit of
    /// movement off the bound. Basic columns are omitted.
    pub fn nonbasic_reduced_costs(&mut self, cols: &[usize]) -> Vec<(usize, bool, f64)> {
        let mut d = Vec::new();
        self.reduced_costs(&self.cost.clone(), &mut d);
        cols.iter()
            .filter_map(|&j| match self.vstat[j] {
                VStat::Basic => None,
                VStat::AtLower => Some((j, false, d[j].max(0.0))),
                VStat::AtUpper => Some((j, true, (-d[j]).max(0.0))),
            })
            .collect()
    }
}

/// Solve the LP relaxation of `model` (binaries relaxed to their [0, 1]
/// box) with the primal simplex. Returns the optimum with a
/// dual-feasibility certificate flag, or the infeasible row set.
pub fn solve_lp(model: &Model) -> Result<LpOutcome, LpError> {
    solve_lp_with(model, SimplexOptions::default(), None)
}

/// [`solve_lp`] with explicit options and an optional starting-basis hint
/// (one basic column per row).
pub fn solve_lp_with(
    model: &Model,
    opts: SimplexOptions,
    hint: Option<&[u32]>,
) -> Result<LpOutcome, LpError> {
    if model.vars.is_empty() {
        return Err(LpError::EmptyModel);
    }
    let mut engine = SimplexEngine::new(model, opts);
    match engine.solve_primal(hint)? {
        EngineOutcome::Infeasible(rows) => Ok(LpOutcome::Infeasible { rows }),
        EngineOutcome::Optimal => {
            let values = engine.struct_values();
            Ok(LpOutcome::Optimal(LpSolution {
                objective: model.objective_value(&values),
                values,
                dual_feasible: engine.dual_feasible(),
                iterations: engine.iterations,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Model, RowSense, VarKind};

    fn simple_model(obj: &[f64], rows: &[(&[f64], RowSense, f64)], upper: f64) -> Model {
        let mut m = Model::default();
        for (j, &c) in obj.iter().enumerate() {
            m.add_var(format!("x{j}"), VarKind::Continuous, 0.0, upper, c);
        }
        for (r, (coeffs, sense, rhs)) in rows.iter().enumerate() {
            let sparse: Vec<(usize, f64)> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, &a)| a != 0.0)
                .map(|(j, &a)| (j, a))
                .collect();
            m.add_row(format!("r{r}"), sparse, *sense, *rhs);
        }
        m
    }

    fn optimal(model: &Model) -> LpSolution {
        match solve_lp(model).unwrap() {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible { rows } => panic!("unexpected infeasible: {rows:?}"),
        }
    }

    #[test]
    fn textbook_max_problems() {
        // max 4x + 3y; x - y <= 1, 2x - y <= 3, y <= 5 -> 31 at (4, 5).
        let m = simple_model(
            &[4.0, 3.0],
            &[
                (&[1.0, -1.0], RowSense::Le, 1.0),
                (&[2.0, -1.0], RowSense::Le, 3.0),
                (&[0.0, 1.0], RowSense::Le, 5.0),
            ],
            f64::INFINITY,
        );
        let s = optimal(&m);
        assert!((s.objective - 31.0).abs() < 1e-9);
        assert!((s.values[0] - 4.0).abs() < 1e-9);
        assert!((s.values[1] - 5.0).abs() < 1e-9);
        assert!(s.dual_feasible);

        // max 5a + 4b + 3c with three <= rows -> 13.
        let m = simple_model(
            &[5.0, 4.0, 3.0],
            &[
                (&[2.0, 3.0, 1.0], RowSense::Le, 5.0),
                (&[4.0, 1.0, 2.0], RowSense::Le, 11.0),
                (&[3.0, 4.0, 2.0], RowSense::Le, 8.0),
            ],
            f64::INFINITY,
        );
        assert!((optimal(&m).objective - 13.0).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_via_phase1() {
        // max x + 2y; x + y = 4, x - y >= -2 -> y=3, x=1 -> 7.
        let m = simple_model(
            &[1.0, 2.0],
            &[
                (&[1.0, 1.0], RowSense::Eq, 4.0),
                (&[1.0, -1.0], RowSense::Ge, -2.0),
            ],
            f64::INFINITY,
        );
        let s = optimal(&m);
        assert!((s.objective - 7.0).abs() < 1e-9, "got {}", s.objective);
    }

    #[test]
    fn upper_bounds_bind() {
        // max x + y with x,y <= 2 and x + y <= 3 -> 3.
        let m = simple_model(&[1.0, 1.0], &[(&[1.0, 1.0], RowSense::Le, 3.0)], 2.0);
        let s = optimal(&m);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_reports_rows() {
        // x >= 0 but x <= -1.
        let m = simple_model(&[1.0], &[(&[1.0], RowSense::Le, -1.0)], f64::INFINITY);
        match solve_lp(&m).unwrap() {
            LpOutcome::Infeasible { rows } => assert_eq!(rows, vec![0]),
            LpOutcome::Optimal(_) => panic!("should be infeasible"),
        }
    }

    #[test]
    fn crossing_bounds_are_infeasible() {
        let mut m = Model::default();
        m.add_var("x", VarKind::Continuous, 2.0, 1.0, 1.0);
        match solve_lp(&m).unwrap() {
            LpOutcome::Infeasible { .. } => {}
            LpOutcome::Optimal(_) => panic!("should be infeasible"),
        }
    }

    #[test]
    fn unbounded_is_an_error() {
        let m = simple_model(&[1.0], &[(&[-1.0], RowSense::Le, 1.0)], f64::INFINITY);
        assert!(matches!(solve_lp(&m), Err(LpError::Unbounded)));
    }

    #[test]
    fn degenerate_cycling_guard() {
        // Beale's classic cycling example (minimization flipped to max).
        let m = simple_model(
            &[0.75, -150.0, 0.02, -6.0],
            &[
                (&[0.25, -60.0, -0.04, 9.0], RowSense::Le, 0.0),
                (&[0.5, -90.0, -0.02, 3.0], RowSense::Le, 0.0),
                (&[0.0, 0.0, 1.0, 0.0], RowSense::Le, 1.0),
            ],
            f64::INFINITY,
        );
        let s = optimal(&m);
        assert!((s.objective - 0.05).abs() < 1e-9, "got {}", s.objective);
    }

    #[test]
    fn negative_lower_bounds() {
        // max x + y with -2 <= x,y <= -1 and x + y >= -3.5.
        let mut m = Model::default();
        m.add_var("x", VarKind::Continuous, -2.0, -1.0, 1.0);
        m.add_var("y", VarKind::Continuous, -2.0, -1.0, 1.0);
        m.add_row("r0", vec![(0, 1.0), (1, 1.0)], RowSense::Ge, -3.5);
        let s = optimal(&m);
        assert!((s.objective - (-2.0)).abs() < 1e-9);
    }

    #[test]
    fn dual_restart_after_bound_change_matches_cold_solve() {
        // Solve, tighten a variable's box, warm restart dually, compare
        // against a cold solve of the modified model.
        let mut m = simple_model(
            &[3.0, 2.0, 4.0],
            &[
                (&[1.0, 1.0, 2.0], RowSense::Le, 4.0),
                (&[2.0, 0.0, 3.0], RowSense::Le, 5.0),
                (&[1.0, 3.0, 0.0], RowSense::Eq, 2.0),
            ],
            10.0,
        );
        let mut engine = SimplexEngine::new(&m, SimplexOptions::default());
        assert_eq!(engine.solve_primal(None).unwrap(), EngineOutcome::Optimal);
        let snap = engine.snapshot();

        engine.set_var_bounds(0, 0.0, 0.25);
        let out = engine.resolve_dual_from(&snap).unwrap();
        assert_eq!(out, EngineOutcome::Optimal);
        let warm_obj = engine.max_objective();

        m.vars[0].upper = 0.25;
        let cold = optimal(&m);
        assert!(
            (warm_obj - cold.objective).abs() < 1e-8,
            "warm {warm_obj} vs cold {}",
            cold.objective
        );
    }

    #[test]
    fn dual_restart_detects_infeasibility() {
        let m = simple_model(&[1.0, 1.0], &[(&[1.0, 1.0], RowSense::Le, 1.0)], 5.0);
        let mut engine = SimplexEngine::new(&m, SimplexOptions::default());
        assert_eq!(engine.solve_primal(None).unwrap(), EngineOutcome::Optimal);
        let snap = engine.snapshot();
        // Force x0 >= 2 while x0 + x1 <= 1 and x1 >= 0.
        engine.set_var_bounds(0, 2.0, 5.0);
        match engine.resolve_dual_from(&snap).unwrap() {
            EngineOutcome::Infeasible(rows) => assert_eq!(rows, vec![0]),
            EngineOutcome::Optimal => panic!("should be infeasible"),
        }
    }

    #[test]
    fn empty_model_is_an_error() {
        let m = Model::default();
        assert!(matches!(solve_lp(&m), Err(LpError::EmptyModel)));
    }
}
