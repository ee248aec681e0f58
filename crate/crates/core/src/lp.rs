//! Bounded-variable primal simplex over dense LU factorizations.
//!
//! Rows are turned into equalities with one slack each; variable bounds are
//! handled implicitly. Phase 1 minimizes the total bound infeasibility of
//! the basic variables (so warm bases that became primal-infeasible after
//! bound changes or row additions are repaired in place), phase 2 optimizes
//! the real objective. Dantzig pricing with a Bland fallback after a run of
//! degenerate pivots guarantees termination.

use crate::error::Error;
use crate::model::{LinearProgram, Sense, EPS_FEAS};

mod lu;
use lu::LuFactors;

/// Refactorize after this many eta updates.
const REFACTOR_INTERVAL: usize = 50;
/// Pivot element magnitude below this is rejected.
const EPS_PIVOT: f64 = 1e-7;
/// Zero tolerance for reduced costs and ratios.
const EPS_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A simplex basis: the basic variable per row plus, for every column
/// (structural and slack), whether it is nonbasic at its upper bound.
#[derive(Debug, Clone, Default)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (meaningful when `status == Optimal`).
    pub point: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    /// Simplex pivots performed (bound flips excluded).
    pub pivots: usize,
}

/// Solves `lp`, optionally warm-starting from a previous basis. The warm
/// basis is extended with slacks of rows added since it was taken; if it is
/// invalid or singular the solver falls back to a cold start.
pub fn solve_lp(lp: &LinearProgram, warm: Option<&Basis>) -> Result<LpSolution, Error> {
    lp.validate()?;
    let mut solver = Simplex::new(lp);
    if let Some(basis) = warm {
        if !solver.try_install(basis) {
            solver.install_slack_basis();
        }
    } else {
        solver.install_slack_basis();
    }
    solver.run()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free variable parked at zero.
    Free,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    n: usize,
    m: usize,
    /// Sparse columns for all n + m variables (slack j = n + i).
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    basic: Vec<usize>,
    xb: Vec<f64>,
    factors: Option<LuFactors>,
    etas: Vec<Eta>,
    pivots: usize,
    degenerate_run: usize,
}

struct Eta {
    pos: usize,
    col: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let n = lp.num_vars;
        let m = lp.num_rows();
        let total = n + m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, c) in row.entries() {
                cols[j].push((i, c));
            }
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for i in 0..m {
            cols[n + i].push((i, 1.0));
            let (lo, hi) = match lp.senses[i] {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        Simplex {
            lp,
            n,
            m,
            cols,
            lower,
            upper,
            state: vec![VarState::AtLower; total],
            basic: Vec::new(),
            xb: Vec::new(),
            factors: None,
            etas: Vec::new(),
            pivots: 0,
            degenerate_run: 0,
        }
    }

    fn default_nonbasic_state(&self, j: usize) -> VarState {
        if self.lower[j].is_finite() {
            VarState::AtLower
        } else if self.upper[j].is_finite() {
            VarState::AtUpper
        } else {
            VarState::Free
        }
    }

    fn install_slack_basis(&mut self) {
        let total = self.n + self.m;
        for j in 0..total {
            self.state[j] = self.default_nonbasic_state(j);
        }
        self.basic = (self.n..total).collect();
        for (pos, &j) in self.basic.iter().enumerate() {
            self.state[j] = VarState::Basic(pos);
        }
        self.factors = None;
        self.etas.clear();
    }

    /// Installs a warm basis, padding with slacks of rows whose slack is not
    /// yet covered. Returns false if the basis is unusable.
    fn try_install(&mut self, warm: &Basis) -> bool {
        let total = self.n + self.m;
        if warm.basic.len() > self.m {
            return false;
        }
        let mut seen = vec![false; total];
        for &j in &warm.basic {
            if j >= total || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        let mut basic = warm.basic.clone();
        // Newly added rows come last; their slacks complete the basis.
        for i in (0..self.m).rev() {
            if basic.len() == self.m {
                break;
            }
            let j = self.n + i;
            if !seen[j] {
                seen[j] = true;
                basic.push(j);
            }
        }
        if basic.len() != self.m {
            return false;
        }
        for j in 0..total {
            self.state[j] = if seen[j] && basic.contains(&j) {
                VarState::AtLower // placeholder, fixed below
            } else {
                let prefer_upper = warm.at_upper.get(j).copied().unwrap_or(false);
                if prefer_upper && self.upper[j].is_finite() {
                    VarState::AtUpper
                } else {
                    self.default_nonbasic_state(j)
                }
            };
        }
        self.basic = basic;
        for (pos, &j) in self.basic.iter().enumerate() {
            self.state[j] = VarState::Basic(pos);
        }
        self.etas.clear();
        match self.refactorize() {
            Ok(()) => true,
            Err(_) => false,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Free => 0.0,
            VarState::Basic(_) => unreachable!("basic variable has no resting value"),
        }
    }

    fn refactorize(&mut self) -> Result<(), Error> {
        let factors = LuFactors::factorize(self.m, |pos, out| {
            for &(i, c) in &self.cols[self.basic[pos]] {
                out[i] = c;
            }
        })?;
        self.factors = Some(factors);
        self.etas.clear();
        self.recompute_basic_values();
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let mut b = self.lp.rhs.clone();
        for j in 0..self.n + self.m {
            if let VarState::Basic(_) = self.state[j] {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(i, c) in &self.cols[j] {
                    b[i] -= c * v;
                }
            }
        }
        self.ftran(&mut b);
        self.xb = b;
    }

    fn ftran(&self, v: &mut Vec<f64>) {
        if let Some(f) = &self.factors {
            f.solve(v);
        }
        for eta in &self.etas {
            let xr = v[eta.pos] / eta.col[eta.pos];
            for (i, &w) in eta.col.iter().enumerate() {
                if i != eta.pos && w != 0.0 {
                    v[i] -= w * xr;
                }
            }
            v[eta.pos] = xr;
        }
    }

    fn btran(&self, c: &mut Vec<f64>) {
        for eta in self.etas.iter().rev() {
            let mut acc = c[eta.pos];
            for (i, &w) in eta.col.iter().enumerate() {
                if i != eta.pos && w != 0.0 {
                    acc -= w * c[i];
                }
            }
            c[eta.pos] = acc / eta.col[eta.pos];
        }
        if let Some(f) = &self.factors {
            f.solve_transposed(c);
        }
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, c)| c * y[i]).sum()
    }

    fn run(&mut self) -> Result<LpSolution, Error> {
        if self.factors.is_none() {
            self.refactorize()?;
        } else {
            self.recompute_basic_values();
        }

        let max_pivots = 10_000 + 200 * (self.m + self.n);

        if !self.phase1(max_pivots)? {
            return Ok(self.finish(LpStatus::Infeasible));
        }
        match self.phase2(max_pivots)? {
            LpStatus::Optimal => {
                // Final clean recomputation from a fresh factorization.
                self.refactorize()?;
                Ok(self.finish(LpStatus::Optimal))
            }
            status => Ok(self.finish(status)),
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for (pos, &j) in self.basic.iter().enumerate() {
            let x = self.xb[pos];
            if x < self.lower[j] {
                total += self.lower[j] - x;
            } else if x > self.upper[j] {
                total += x - self.upper[j];
            }
        }
        total
    }

    /// Returns true when a primal-feasible basis was reached.
    fn phase1(&mut self, max_pivots: usize) -> Result<bool, Error> {
        loop {
            if self.infeasibility() <= EPS_FEAS * (1.0 + self.m as f64) {
                // Snap residual violations onto the bounds.
                for (pos, &j) in self.basic.iter().enumerate() {
                    self.xb[pos] = self.xb[pos].clamp(
                        if self.lower[j].is_finite() { self.lower[j] - EPS_FEAS } else { f64::NEG_INFINITY },
                        if self.upper[j].is_finite() { self.upper[j] + EPS_FEAS } else { f64::INFINITY },
                    );
                }
                return Ok(true);
            }
            if self.pivots >= max_pivots {
                return Err(Error::numerical("phase-1 pivot limit exceeded"));
            }

            // Phase-1 costs: -1 below lower, +1 above upper, on basics only.
            let mut y = vec![0.0; self.m];
            for (pos, &j) in self.basic.iter().enumerate() {
                let x = self.xb[pos];
                y[pos] = if x < self.lower[j] - EPS_FEAS {
                    -1.0
                } else if x > self.upper[j] + EPS_FEAS {
                    1.0
                } else {
                    0.0
                };
            }
            self.btran(&mut y);

            let Some((q, dir)) = self.price(&y, true) else {
                return Ok(false); // dual-feasible for phase 1 with residual infeasibility
            };
            if !self.step(q, dir, true)? {
                return Err(Error::numerical("unblocked improving ray in phase 1"));
            }
            if self.etas.len() >= REFACTOR_INTERVAL {
                self.refactorize()?;
            }
        }
    }

    fn phase2(&mut self, max_pivots: usize) -> Result<LpStatus, Error> {
        loop {
            if self.pivots >= max_pivots {
                return Err(Error::numerical("phase-2 pivot limit exceeded"));
            }
            let mut y = vec![0.0; self.m];
            for (pos, &j) in self.basic.iter().enumerate() {
                y[pos] = self.cost(j);
            }
            self.btran(&mut y);

            let Some((q, dir)) = self.price(&y, false) else {
                return Ok(LpStatus::Optimal);
            };
            if !self.step(q, dir, false)? {
                return Ok(LpStatus::Unbounded);
            }
            if self.etas.len() >= REFACTOR_INTERVAL {
                self.refactorize()?;
            }
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.lp.objective[j]
        } else {
            0.0
        }
    }

    /// Picks an entering variable: Dantzig normally, Bland after a run of
    /// degenerate pivots. Returns the variable and its movement direction.
    fn price(&self, y: &[f64], phase1: bool) -> Option<(usize, f64)> {
        let bland = self.degenerate_run > 2 * (self.m + self.n);
        let mut best: Option<(usize, f64, f64)> = None; // (var, dir, violation)
        for j in 0..self.n + self.m {
            let state = self.state[j];
            if matches!(state, VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            let c = if phase1 { 0.0 } else { self.cost(j) };
            let d = c - self.column_dot(j, y);
            let candidate = match state {
                VarState::AtLower if d < -EPS_ZERO => Some((1.0, -d)),
                VarState::AtUpper if d > EPS_ZERO => Some((-1.0, d)),
                VarState::Free if d.abs() > EPS_ZERO => Some((if d < 0.0 { 1.0 } else { -1.0 }, d.abs())),
                _ => None,
            };
            if let Some((dir, violation)) = candidate {
                if bland {
                    return Some((j, dir));
                }
                if best.map_or(true, |(_, _, v)| violation > v) {
                    best = Some((j, dir, violation));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Performs one ratio-test step for entering variable `q` moving in
    /// `dir`. Returns false when the improving ray is unblocked (unbounded).
    /// In phase 1, basic variables outside their bounds block only when they
    /// reach the violated bound from outside.
    fn step(&mut self, q: usize, dir: f64, phase1: bool) -> Result<bool, Error> {
        let mut w = vec![0.0; self.m];
        for &(i, c) in &self.cols[q] {
            w[i] = c;
        }
        self.ftran(&mut w);

        let bland = self.degenerate_run > 2 * (self.m + self.n);
        let span_q = self.upper[q] - self.lower[q]; // may be inf or 0
        let mut t_limit = if span_q.is_finite() { span_q } else { f64::INFINITY };
        let mut blocker: Option<(usize, VarState, f64)> = None; // (pos, leave-to, |pivot|)

        for pos in 0..self.m {
            let rate = -dir * w[pos];
            if rate.abs() <= EPS_PIVOT {
                continue;
            }
            let j = self.basic[pos];
            let x = self.xb[pos];
            let below = phase1 && x < self.lower[j] - EPS_FEAS;
            let above = phase1 && x > self.upper[j] + EPS_FEAS;
            let (bound, leave_to) = if below {
                if rate > 0.0 {
                    (self.lower[j], VarState::AtLower)
                } else {
                    continue; // moving further below; slope already priced in
                }
            } else if above {
                if rate < 0.0 {
                    (self.upper[j], VarState::AtUpper)
                } else {
                    continue;
                }
            } else if rate > 0.0 {
                if !self.upper[j].is_finite() {
                    continue;
                }
                (self.upper[j], VarState::AtUpper)
            } else {
                if !self.lower[j].is_finite() {
                    continue;
                }
                (self.lower[j], VarState::AtLower)
            };
            let t = ((bound - x) / rate).max(0.0);
            let replace = match blocker {
                None => t < t_limit - EPS_ZERO || (t < t_limit + EPS_ZERO),
                Some((bpos, _, bpiv)) => {
                    if t < t_limit - EPS_ZERO {
                        true
                    } else if t < t_limit + EPS_ZERO {
                        if bland {
                            self.basic[pos] < self.basic[bpos]
                        } else {
                            w[pos].abs() > bpiv
                        }
                    } else {
                        false
                    }
                }
            };
            if replace {
                t_limit = t.min(t_limit);
                blocker = Some((pos, leave_to, w[pos].abs()));
            }
        }

        if !t_limit.is_finite() {
            return Ok(false);
        }

        let t = t_limit.max(0.0);
        // Move the basics.
        for pos in 0..self.m {
            if w[pos] != 0.0 {
                self.xb[pos] -= dir * t * w[pos];
            }
        }

        match blocker {
            None => {
                // Bound flip of the entering variable.
                self.state[q] = match self.state[q] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    other => other,
                };
                self.degenerate_run = if t <= EPS_ZERO { self.degenerate_run + 1 } else { 0 };
            }
            Some((pos, leave_to, pivot_mag)) => {
                if pivot_mag < EPS_PIVOT {
                    return Err(Error::numerical("pivot element below tolerance"));
                }
                let leaving = self.basic[pos];
                let entering_value = match self.state[q] {
                    VarState::AtLower => self.lower[q] + dir * t,
                    VarState::AtUpper => self.upper[q] + dir * t,
                    VarState::Free => dir * t,
                    VarState::Basic(_) => unreachable!(),
                };
                self.state[leaving] = leave_to;
                self.state[q] = VarState::Basic(pos);
                self.basic[pos] = q;
                self.xb[pos] = entering_value;
                self.etas.push(Eta { pos, col: w });
                self.pivots += 1;
                self.degenerate_run = if t <= EPS_ZERO { self.degenerate_run + 1 } else { 0 };
            }
        }
        Ok(true)
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        let total = self.n + self.m;
        let mut values = vec![0.0; total];
        for j in 0..total {
            match self.state[j] {
                VarState::Basic(pos) => values[j] = self.xb[pos],
                _ => values[j] = self.nonbasic_value(j),
            }
        }
        let point: Vec<f64> = values[..self.n].to_vec();
        let objective = point
            .iter()
            .zip(&self.lp.objective)
            .map(|(&x, &c)| x * c)
            .sum();
        let at_upper = (0..total).map(|j| self.state[j] == VarState::AtUpper).collect();
        LpSolution {
            status,
            point,
            objective,
            basis: Basis { basic: self.basic.clone(), at_upper },
            pivots: self.pivots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparseRow;

    fn lp(n: usize) -> LinearProgram {
        LinearProgram::new(n)
    }

    fn row(entries: &[(usize, f64)]) -> SparseRow {
        SparseRow::new(entries.to_vec())
    }

    #[test]
    fn single_bound_active() {
        // min x s.t. x >= 1, x in [0, inf)
        let mut p = lp(1);
        p.objective = vec![1.0];
        p.add_row(row(&[(0, 1.0)]), Sense::Ge, 1.0);
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.point[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_vertex() {
        // min -x-y s.t. x+y <= 1, x,y in [0,1]
        let mut p = lp(2);
        p.objective = vec![-1.0, -1.0];
        p.upper = vec![1.0, 1.0];
        p.add_row(row(&[(0, 1.0), (1, 1.0)]), Sense::Le, 1.0);
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_constraint_vertex() {
        // min -x-2y s.t. x+y <= 3, x <= 2, y <= 2, x,y >= 0 -> (1,2), obj -5
        let mut p = lp(2);
        p.objective = vec![-1.0, -2.0];
        p.upper = vec![2.0, 2.0];
        p.add_row(row(&[(0, 1.0), (1, 1.0)]), Sense::Le, 3.0);
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 5.0).abs() < 1e-9, "objective {}", sol.objective);
        assert!((sol.point[0] - 1.0).abs() < 1e-7);
        assert!((sol.point[1] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and x >= 2
        let mut p = lp(1);
        p.add_row(row(&[(0, 1.0)]), Sense::Le, 1.0);
        p.add_row(row(&[(0, 1.0)]), Sense::Ge, 2.0);
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut p = lp(1);
        p.objective = vec![-1.0];
        p.add_row(row(&[(0, -1.0)]), Sense::Le, 0.0); // -x <= 0, no upper bound
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows() {
        // min x+y s.t. x+y = 2, x - y = 0 -> x=y=1
        let mut p = lp(2);
        p.objective = vec![1.0, 1.0];
        p.add_row(row(&[(0, 1.0), (1, 1.0)]), Sense::Eq, 2.0);
        p.add_row(row(&[(0, 1.0), (1, -1.0)]), Sense::Eq, 0.0);
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.point[0] - 1.0).abs() < 1e-7);
        assert!((sol.point[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn warm_restart_takes_zero_pivots() {
        let mut p = lp(2);
        p.objective = vec![-1.0, -2.0];
        p.upper = vec![2.0, 2.0];
        p.add_row(row(&[(0, 1.0), (1, 1.0)]), Sense::Le, 3.0);
        let sol = solve_lp(&p, None).unwrap();
        let again = solve_lp(&p, Some(&sol.basis)).unwrap();
        assert_eq!(again.status, LpStatus::Optimal);
        assert_eq!(again.pivots, 0);
        assert!((again.objective - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn warm_restart_after_row_addition() {
        let mut p = lp(2);
        p.objective = vec![-1.0, -2.0];
        p.upper = vec![2.0, 2.0];
        p.add_row(row(&[(0, 1.0), (1, 1.0)]), Sense::Le, 3.0);
        let sol = solve_lp(&p, None).unwrap();
        // Cut off the old optimum.
        p.add_row(row(&[(1, 1.0)]), Sense::Le, 1.0);
        let warm = solve_lp(&p, Some(&sol.basis)).unwrap();
        let cold = solve_lp(&p, None).unwrap();
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-7);
        assert!((warm.objective + 4.0).abs() < 1e-7); // x=2, y=1
    }

    #[test]
    fn feasibility_residuals_hold() {
        let mut p = lp(3);
        p.objective = vec![1.0, -1.0, 2.0];
        p.upper = vec![4.0, 4.0, 4.0];
        p.add_row(row(&[(0, 2.0), (1, 1.0), (2, -1.0)]), Sense::Ge, 1.0);
        p.add_row(row(&[(0, 1.0), (1, -3.0)]), Sense::Le, 2.0);
        let sol = solve_lp(&p, None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        for (i, r) in p.rows.iter().enumerate() {
            let lhs: f64 = r.entries().iter().map(|&(j, c)| c * sol.point[j]).sum();
            match p.senses[i] {
                Sense::Le => assert!(lhs <= p.rhs[i] + EPS_FEAS),
                Sense::Ge => assert!(lhs >= p.rhs[i] - EPS_FEAS),
                Sense::Eq => assert!((lhs - p.rhs[i]).abs() <= EPS_FEAS),
            }
        }
        for j in 0..3 {
            assert!(sol.point[j] >= p.lower[j] - EPS_FEAS && sol.point[j] <= p.upper[j] + EPS_FEAS);
        }
    }
}
