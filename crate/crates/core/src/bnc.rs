//! Branch-and-bound over the LP engine with lazy-constraint separation at
//! integer candidates and cutting-plane separation at fractional points,
//! plus the root cutting-plane loop and tight-cut filtering used for warm
//! starting.

use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::Error;
use crate::lp::{solve_lp, Basis, LpSolution, LpStatus};
use crate::model::{
    cut_slack, relative_gap, Cut, MilpModel, PhaseTimes, Sense, SolveReport, SolveStatus, EPS_INT,
};

/// Root cutting-plane rounds before the loop gives up.
pub const ROOT_ROUND_LIMIT: usize = 200;
/// Fractional separation runs at the root and at every node whose ordinal is
/// a multiple of this.
const FRACTIONAL_SEPARATION_PERIOD: usize = 8;

/// Cut collection with canonical deduplication (sorted sparse row, sense and
/// right-hand side; origin metadata is ignored for identity).
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    keys: HashSet<Vec<u64>>,
}

fn dedup_key(cut: &Cut) -> Vec<u64> {
    let mut key = Vec::with_capacity(2 * cut.row.entries().len() + 2);
    for &(j, c) in cut.row.entries() {
        key.push(j as u64);
        key.push(c.to_bits());
    }
    key.push(match cut.sense {
        Sense::Le => 0,
        Sense::Ge => 1,
        Sense::Eq => 2,
    });
    key.push(cut.rhs.to_bits());
    key
}

impl CutPool {
    pub fn new() -> Self {
        CutPool::default()
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    /// Adds a cut unless an identical one is already present. Returns true
    /// when the cut was new.
    pub fn try_insert(&mut self, cut: Cut) -> bool {
        if self.keys.insert(dedup_key(&cut)) {
            self.cuts.push(cut);
            true
        } else {
            false
        }
    }
}

impl FromIterator<Cut> for CutPool {
    fn from_iter<I: IntoIterator<Item = Cut>>(iter: I) -> Self {
        let mut pool = CutPool::new();
        for cut in iter {
            pool.try_insert(cut);
        }
        pool
    }
}

/// Outcome of the root cutting-plane loop.
#[derive(Debug)]
pub struct RootResult {
    /// Final LP relaxation solution (status Infeasible when the root LP is).
    pub solution: LpSolution,
    /// Every cut appended during the loop.
    pub pool: CutPool,
    /// Cutting-plane rounds executed.
    pub rounds: usize,
    /// LP solves performed (rounds + 1 unless infeasible early).
    pub lp_solves: usize,
}

/// Iterates LP solve and separation at the relaxation optimum until no
/// separator fires or the round limit is reached.
pub fn solve_root(model: &MilpModel) -> Result<RootResult, Error> {
    let mut lp = model.lp.clone();
    let mut pool = CutPool::new();
    let mut sol = solve_lp(&lp, None)?;
    let mut lp_solves = 1;
    let mut rounds = 0;

    while sol.status == LpStatus::Optimal && rounds < ROOT_ROUND_LIMIT {
        let integral = model.point_is_integral(&sol.point);
        let mut added = false;
        for sep in &model.separators {
            for cut in sep.separate(&sol.point, integral) {
                if pool.try_insert(cut.clone()) {
                    lp.add_row(cut.row, cut.sense, cut.rhs);
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
        rounds += 1;
        let basis = sol.basis.clone();
        sol = solve_lp(&lp, Some(&basis))?;
        lp_solves += 1;
    }
    if sol.status == LpStatus::Unbounded {
        return Err(Error::structural("root LP relaxation is unbounded"));
    }
    Ok(RootResult { solution: sol, pool, rounds, lp_solves })
}

/// Keeps exactly the cuts whose slack at `point` is at most `eps_tight`,
/// preserving order.
pub fn filter_tight(pool: &CutPool, point: &[f64], eps_tight: f64) -> Result<CutPool, Error> {
    let mut out = CutPool::new();
    for cut in pool.cuts() {
        if cut_slack(cut, point)? <= eps_tight {
            out.try_insert(cut.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Default, Clone)]
pub struct BncOptions {
    pub time_limit: Option<Duration>,
    /// When set, one CSV line per processed node is written here.
    pub event_log: Option<std::path::PathBuf>,
}

#[derive(Debug)]
pub struct BncResult {
    pub report: SolveReport,
    /// Incumbent point with integral-marked entries snapped to integers.
    pub incumbent: Option<Vec<f64>>,
}

struct Node {
    /// Cumulative bound tightenings relative to the root: (var, lower, upper).
    changes: Vec<(usize, f64, f64)>,
    parent_bound: f64,
    depth: usize,
    seq: usize,
    basis: Option<Basis>,
}

// Best bound first, then deepest, then insertion order. BinaryHeap is a
// max-heap, so all comparisons are reversed.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .parent_bound
            .total_cmp(&self.parent_bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Node {}

/// Branch-and-cut solve. `initial_cuts` are installed as ordinary rows
/// before the root relaxation.
pub fn solve_bnc(
    model: &MilpModel,
    initial_cuts: &CutPool,
    options: &BncOptions,
) -> Result<BncResult, Error> {
    let start = Instant::now();
    let deadline = options.time_limit.map(|d| start + d);
    let mut log: Option<std::io::BufWriter<std::fs::File>> = match &options.event_log {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            writeln!(f, "node,depth,bound,incumbent,cuts_added,action")?;
            Some(f)
        }
        None => None,
    };

    let mut lp = model.lp.clone();
    let mut pool = CutPool::new();
    for cut in initial_cuts.cuts() {
        if pool.try_insert(cut.clone()) {
            lp.add_row(cut.row.clone(), cut.sense, cut.rhs);
        }
    }
    let root_lower = lp.lower.clone();
    let root_upper = lp.upper.clone();

    // The root relaxation is solved before the deadline applies, so even an
    // immediate timeout reports a meaningful dual bound.
    let root_relax = solve_lp(&lp, None)?;
    let (root_bound, root_basis) = match root_relax.status {
        LpStatus::Optimal => (root_relax.objective, Some(root_relax.basis)),
        LpStatus::Infeasible => (f64::NEG_INFINITY, None),
        LpStatus::Unbounded => {
            return Err(Error::structural("unbounded LP relaxation in search tree"))
        }
    };

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_seq = 0usize;
    heap.push(Node {
        changes: Vec::new(),
        parent_bound: root_bound,
        depth: 0,
        seq: next_seq,
        basis: root_basis,
    });
    next_seq += 1;

    let mut best_obj = f64::INFINITY;
    let mut best_point: Option<Vec<f64>> = None;
    let mut bound = f64::NEG_INFINITY;
    let mut nodes = 0usize;
    let mut cuts_added: BTreeMap<crate::model::CutOrigin, usize> = BTreeMap::new();
    let mut status = SolveStatus::Optimal;
    let mut any_feasible_possible = true;

    'outer: while let Some(node) = heap.pop() {
        bound = bound.max(node.parent_bound.min(best_obj));
        if node.parent_bound >= best_obj - 1e-9 {
            // Best-first order: everything left is no better.
            bound = best_obj;
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            status = SolveStatus::TimeLimit;
            heap.push(node);
            break;
        }

        nodes += 1;
        let node_id = nodes;
        lp.lower.copy_from_slice(&root_lower);
        lp.upper.copy_from_slice(&root_upper);
        for &(j, lo, hi) in &node.changes {
            lp.lower[j] = lo;
            lp.upper[j] = hi;
        }

        let mut warm = node.basis.clone();
        let mut node_cut_count = 0usize;
        let sol = loop {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                status = SolveStatus::TimeLimit;
                heap.push(node);
                break 'outer;
            }
            let sol = solve_lp(&lp, warm.as_ref())?;
            match sol.status {
                LpStatus::Infeasible => break sol,
                LpStatus::Unbounded => {
                    return Err(Error::structural("unbounded LP relaxation in search tree"))
                }
                LpStatus::Optimal => {}
            }
            if sol.objective >= best_obj - 1e-9 {
                break sol; // dominated, no point separating further
            }
            let integral = model.point_is_integral(&sol.point);
            let separate_fractional =
                node_id == 1 || node_id % FRACTIONAL_SEPARATION_PERIOD == 0;
            if !integral && !separate_fractional {
                break sol;
            }
            let mut added = false;
            for sep in &model.separators {
                for cut in sep.separate(&sol.point, integral) {
                    let origin = cut.origin;
                    if pool.try_insert(cut.clone()) {
                        lp.add_row(cut.row, cut.sense, cut.rhs);
                        *cuts_added.entry(origin).or_insert(0) += 1;
                        node_cut_count += 1;
                        added = true;
                    }
                }
            }
            if !added {
                break sol;
            }
            warm = Some(sol.basis);
        };

        let action: String;
        match sol.status {
            LpStatus::Infeasible => {
                action = "infeasible".into();
            }
            LpStatus::Optimal if sol.objective >= best_obj - 1e-9 => {
                action = "pruned".into();
            }
            LpStatus::Optimal => {
                if model.point_is_integral(&sol.point) {
                    // Lazy cuts were already exhausted in the loop above.
                    let mut point = sol.point.clone();
                    for (j, &is_int) in model.integral.iter().enumerate() {
                        if is_int {
                            point[j] = point[j].round();
                        }
                    }
                    best_obj = sol.objective;
                    best_point = Some(point);
                    action = "incumbent".into();
                } else {
                    let branch_var = pick_branch_var(model, &sol.point)
                        .ok_or_else(|| Error::numerical("no fractional variable to branch on"))?;
                    let x = sol.point[branch_var];
                    let mut down = node.changes.clone();
                    down.push((branch_var, lp.lower[branch_var], x.floor()));
                    let mut up = node.changes.clone();
                    up.push((branch_var, x.ceil(), lp.upper[branch_var]));
                    for changes in [down, up] {
                        heap.push(Node {
                            changes,
                            parent_bound: sol.objective,
                            depth: node.depth + 1,
                            seq: next_seq,
                            basis: Some(sol.basis.clone()),
                        });
                        next_seq += 1;
                    }
                    action = format!("branch:{branch_var}");
                }
            }
            _ => unreachable!(),
        }
        if node_id == 1 && sol.status == LpStatus::Infeasible {
            any_feasible_possible = false;
        }
        if let Some(f) = log.as_mut() {
            let inc = if best_obj.is_finite() { format!("{best_obj}") } else { "inf".into() };
            let nb = if sol.status == LpStatus::Infeasible {
                "inf".into()
            } else {
                format!("{}", sol.objective)
            };
            writeln!(f, "{node_id},{},{nb},{inc},{node_cut_count},{action}", node.depth)?;
        }
    }

    if status == SolveStatus::Optimal {
        if best_point.is_some() {
            bound = best_obj;
        } else {
            status = SolveStatus::Infeasible;
            let _ = any_feasible_possible;
        }
    } else if status == SolveStatus::TimeLimit {
        // Tightest proven bound: the best open node, if any.
        if let Some(top) = heap.peek() {
            bound = bound.max(top.parent_bound).min(best_obj);
        }
    }

    if let Some(mut f) = log.take() {
        f.flush()?;
    }

    let objective = if best_point.is_some() { best_obj } else { f64::INFINITY };
    let report = SolveReport {
        status,
        objective,
        bound,
        gap: if status == SolveStatus::Optimal && best_point.is_some() {
            0.0
        } else {
            relative_gap(objective, bound).max(0.0)
        },
        nodes,
        cuts_added,
        cuts_transferred: initial_cuts.len(),
        tight_ratio: 1.0,
        wall_time: PhaseTimes {
            reduction: 0.0,
            root: 0.0,
            branch_and_cut: start.elapsed().as_secs_f64(),
        },
    };
    Ok(BncResult { report, incumbent: best_point })
}

/// Most fractional integral-marked variable; ties go to the lowest index.
fn pick_branch_var(model: &MilpModel, point: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&is_int, &x)) in model.integral.iter().zip(point).enumerate() {
        if !is_int {
            continue;
        }
        let frac = x - x.floor();
        if frac <= EPS_INT || frac >= 1.0 - EPS_INT {
            continue;
        }
        let score = (frac - 0.5).abs();
        if best.map_or(true, |(_, s)| score < s - 1e-15) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CutOrigin, LinearProgram, Separator, SparseRow, VarMeta};
    use std::sync::Arc;

    fn binary_model(n: usize, objective: Vec<f64>) -> MilpModel {
        let mut lp = LinearProgram::new(n);
        lp.objective = objective;
        lp.upper = vec![1.0; n];
        MilpModel::new(lp, vec![true; n], vec![VarMeta::new(1, "x"); n])
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // min -3a -4b -2c s.t. 2a + 3b + c <= 4 over binaries.
        let mut model = binary_model(3, vec![-3.0, -4.0, -2.0]);
        model
            .lp
            .add_row(SparseRow::new(vec![(0, 2.0), (1, 3.0), (2, 1.0)]), Sense::Le, 4.0);
        let res = solve_bnc(&model, &CutPool::new(), &BncOptions::default()).unwrap();
        assert_eq!(res.report.status, SolveStatus::Optimal);

        // Brute force over all 0/1 vectors.
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|j| ((mask >> j) & 1) as f64).collect();
            if 2.0 * x[0] + 3.0 * x[1] + x[2] <= 4.0 {
                best = best.min(-3.0 * x[0] - 4.0 * x[1] - 2.0 * x[2]);
            }
        }
        assert!((res.report.objective - best).abs() < 1e-9);
        assert!(res.report.gap <= 1e-6);
    }

    #[test]
    fn integral_root_takes_one_node() {
        let mut model = binary_model(2, vec![1.0, 1.0]);
        model.lp.add_row(SparseRow::new(vec![(0, 1.0)]), Sense::Ge, 1.0);
        let res = solve_bnc(&model, &CutPool::new(), &BncOptions::default()).unwrap();
        assert_eq!(res.report.status, SolveStatus::Optimal);
        assert_eq!(res.report.nodes, 1);
        assert!((res.report.objective - 1.0).abs() < 1e-9);
        assert_eq!(res.incumbent.unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn infeasible_model_reported() {
        let mut model = binary_model(1, vec![1.0]);
        model.lp.add_row(SparseRow::new(vec![(0, 1.0)]), Sense::Ge, 2.0);
        let res = solve_bnc(&model, &CutPool::new(), &BncOptions::default()).unwrap();
        assert_eq!(res.report.status, SolveStatus::Infeasible);
        assert!(res.incumbent.is_none());
    }

    #[test]
    fn zero_time_limit_reports_time_limit() {
        let model = binary_model(2, vec![-1.0, -1.0]);
        let opts = BncOptions { time_limit: Some(Duration::ZERO), ..Default::default() };
        let res = solve_bnc(&model, &CutPool::new(), &opts).unwrap();
        assert_eq!(res.report.status, SolveStatus::TimeLimit);
        assert_eq!(res.report.gap, f64::INFINITY);
    }

    #[test]
    fn pool_dedups_identical_cuts() {
        let cut = Cut::new(SparseRow::new(vec![(0, 1.0), (1, 1.0)]), Sense::Le, 1.0, CutOrigin::Subtour, 0);
        let mut pool = CutPool::new();
        assert!(pool.try_insert(cut.clone()));
        assert!(!pool.try_insert(cut.clone()));
        // Different rhs is a different cut.
        let mut other = cut;
        other.rhs = 2.0;
        assert!(pool.try_insert(other));
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn filter_tight_thresholds() {
        // Three Le cuts over a 1-var space with slacks 0, 1e-7, 0.5 at x=1.
        let mk = |rhs: f64| Cut::new(SparseRow::new(vec![(0, 1.0)]), Sense::Le, rhs, CutOrigin::Subtour, 0);
        let pool: CutPool = vec![mk(1.0), mk(1.0 + 1e-7), mk(1.5)].into_iter().collect();
        let tight = filter_tight(&pool, &[1.0], 1e-6).unwrap();
        assert_eq!(tight.len(), 2);
        let empty = filter_tight(&CutPool::new(), &[1.0], 1e-6).unwrap();
        assert!(empty.is_empty());
        // At x=1.5 the first two are violated (negative slack) and the third
        // is exactly tight; all pass the threshold.
        let all = filter_tight(&pool, &[1.5], 1e-6).unwrap();
        assert_eq!(all.len(), 3);
    }

    /// Separator forbidding x0 + x1 >= 2 via the cut x0 + x1 <= 1.
    struct PairConflict;
    impl Separator for PairConflict {
        fn name(&self) -> &'static str {
            "pair_conflict"
        }
        fn separate(&self, point: &[f64], _integral: bool) -> Vec<Cut> {
            if point[0] + point[1] > 1.0 + 1e-6 {
                vec![Cut::new(SparseRow::new(vec![(0, 1.0), (1, 1.0)]), Sense::Le, 1.0, CutOrigin::Subtour, 0)]
            } else {
                Vec::new()
            }
        }
    }

    #[test]
    fn root_loop_reaches_fixed_point() {
        let mut model = binary_model(2, vec![-1.0, -1.0]);
        model.add_separator(Arc::new(PairConflict));
        let plain = solve_lp(&model.lp, None).unwrap();
        let root = solve_root(&model).unwrap();
        assert_eq!(root.pool.len(), 1);
        assert_eq!(root.lp_solves, 2);
        // Cutting planes only tighten the relaxation.
        assert!(root.solution.objective >= plain.objective - 1e-9);
        assert!((root.solution.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn root_loop_without_violations_is_single_solve() {
        let mut model = binary_model(2, vec![1.0, 1.0]);
        model.add_separator(Arc::new(PairConflict));
        let root = solve_root(&model).unwrap();
        assert!(root.pool.is_empty());
        assert_eq!(root.lp_solves, 1);
    }

    #[test]
    fn lazy_separation_rejects_bad_incumbents() {
        let mut model = binary_model(2, vec![-1.0, -1.0]);
        model.add_separator(Arc::new(PairConflict));
        let res = solve_bnc(&model, &CutPool::new(), &BncOptions::default()).unwrap();
        assert_eq!(res.report.status, SolveStatus::Optimal);
        assert!((res.report.objective + 1.0).abs() < 1e-9);
        let inc = res.incumbent.unwrap();
        assert!(inc[0] + inc[1] <= 1.0 + 1e-9);
    }

    #[test]
    fn initial_cuts_do_not_change_optimum() {
        let mut model = binary_model(2, vec![-1.0, -1.0]);
        model.add_separator(Arc::new(PairConflict));
        let bare = solve_bnc(&model, &CutPool::new(), &BncOptions::default()).unwrap();
        let cuts: CutPool = vec![Cut::new(
            SparseRow::new(vec![(0, 1.0), (1, 1.0)]),
            Sense::Le,
            1.0,
            CutOrigin::Subtour,
            0,
        )]
        .into_iter()
        .collect();
        let warm = solve_bnc(&model, &cuts, &BncOptions::default()).unwrap();
        assert!((bare.report.objective - warm.report.objective).abs() < 1e-9);
        assert_eq!(warm.report.cuts_transferred, 1);
    }

    #[test]
    fn event_log_is_written() {
        let dir = std::env::temp_dir().join(format!("bnc_log_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("events.csv");
        let mut model = binary_model(3, vec![-1.0, -1.0, -1.0]);
        model
            .lp
            .add_row(SparseRow::new(vec![(0, 2.0), (1, 2.0), (2, 2.0)]), Sense::Le, 3.0);
        let opts = BncOptions { event_log: Some(path.clone()), ..Default::default() };
        let res = solve_bnc(&model, &CutPool::new(), &opts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("node,depth,bound,incumbent,cuts_added,action"));
        assert_eq!(text.lines().count(), res.report.nodes + 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
