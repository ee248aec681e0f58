//! Pipeline orchestration: scenario reduction, root cutting-plane solve of
//! the reduced problem, and tight-cut warm starting of the full problem,
//! plus the fix-first-stage evaluation used by the convergence study.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bnc::{filter_tight, solve_bnc, solve_root, BncOptions, BncResult, CutPool};
use crate::error::Error;
use crate::lp::LpStatus;
use crate::model::{Cut, MilpModel, SolveStatus, EPS_INT, EPS_TIGHT};
use crate::reduce::{fast_forward_select, reduction_fraction_to_target, DistanceMatrix};

/// A two-stage stochastic program the pipeline can drive. First-stage
/// variables must occupy a prefix of the variable vector in every model the
/// adapter builds.
pub trait TwoStageProblem {
    fn num_scenarios(&self) -> usize;

    fn probabilities(&self) -> &[f64];

    /// Builds the model over a scenario subset (original indices, ascending)
    /// with the given probabilities. The full index set with the original
    /// probabilities must yield the direct formulation.
    fn build_model(&self, scenarios: &[usize], probabilities: &[f64]) -> Result<MilpModel, Error>;

    /// Scenario distance used by the reduction step.
    fn distance(&self, i: usize, j: usize) -> f64;

    /// Maps a cut generated on the reduced model (built from `selected`)
    /// onto the full model: first-stage cuts unchanged, second-stage cuts to
    /// the same original scenario.
    fn transfer_cut(&self, cut: &Cut, selected: &[usize]) -> Result<Cut, Error>;

    /// Length of the first-stage variable prefix.
    fn num_first_stage_vars(&self) -> usize;
}

/// Reduce, solve the reduced root, transfer the tight cuts, then run
/// branch-and-cut on the full problem. The time limit covers all phases.
pub fn tulip_solve(
    problem: &dyn TwoStageProblem,
    fraction: f64,
    time_limit: Option<Duration>,
) -> Result<BncResult, Error> {
    let start = Instant::now();
    let s = problem.num_scenarios();
    let target = reduction_fraction_to_target(s, fraction)?;
    let d = DistanceMatrix::from_metric(s, |i, j| problem.distance(i, j))?;
    let reduction = fast_forward_select(&d, problem.probabilities(), target)?;
    let t_reduction = start.elapsed().as_secs_f64();

    let reduced = problem.build_model(&reduction.selected, &reduction.new_probabilities)?;
    let root = solve_root(&reduced)?;
    let mut transferred = CutPool::new();
    let mut tight_ratio = 1.0;
    if root.solution.status == LpStatus::Optimal && !root.pool.is_empty() {
        let tight = filter_tight(&root.pool, &root.solution.point, EPS_TIGHT)?;
        tight_ratio = tight.len() as f64 / root.pool.len() as f64;
        for cut in tight.cuts() {
            transferred.try_insert(problem.transfer_cut(cut, &reduction.selected)?);
        }
    }
    let t_root = start.elapsed().as_secs_f64() - t_reduction;

    let all: Vec<usize> = (0..s).collect();
    let full = problem.build_model(&all, problem.probabilities())?;
    let remaining = time_limit.map(|limit| limit.saturating_sub(start.elapsed()));
    let opts = BncOptions { time_limit: remaining, ..Default::default() };
    let mut result = solve_bnc(&full, &transferred, &opts)?;
    result.report.tight_ratio = tight_ratio;
    result.report.cuts_transferred = transferred.len();
    result.report.wall_time.reduction = t_reduction;
    result.report.wall_time.root = t_root;
    Ok(result)
}

/// Solves the full problem with the first-stage variables clamped to the
/// given integral point.
pub fn fix_first_stage_and_resolve(
    problem: &dyn TwoStageProblem,
    first_stage_point: &[f64],
    time_limit: Option<Duration>,
) -> Result<BncResult, Error> {
    let k = problem.num_first_stage_vars();
    if first_stage_point.len() < k {
        return Err(Error::argument("first-stage point too short"));
    }
    let all: Vec<usize> = (0..problem.num_scenarios()).collect();
    let mut model = problem.build_model(&all, problem.probabilities())?;
    for j in 0..k {
        let v = first_stage_point[j].round();
        if (first_stage_point[j] - v).abs() > EPS_INT {
            return Err(Error::argument(format!("first-stage value at {j} is not integral")));
        }
        if v < model.lp.lower[j] - EPS_INT || v > model.lp.upper[j] + EPS_INT {
            return Err(Error::argument(format!("first-stage value at {j} violates its bounds")));
        }
        model.lp.lower[j] = v;
        model.lp.upper[j] = v;
    }
    let opts = BncOptions { time_limit, ..Default::default() };
    solve_bnc(&model, &CutPool::new(), &opts)
}

#[derive(Debug, Clone, Copy)]
pub enum CurveMode {
    FastForward,
    /// Uniform scenario samples, `runs` repetitions per size.
    Random { runs: usize, seed: u64 },
}

/// One measured point of the convergence study.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub size: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// For each size: pick a scenario subset (fast-forward or random), solve the
/// reduced problem, fix its first stage in the full problem and re-solve,
/// recording the resulting objective.
pub fn convergence_curve(
    problem: &dyn TwoStageProblem,
    sizes: &[usize],
    mode: CurveMode,
) -> Result<Vec<CurvePoint>, Error> {
    let s = problem.num_scenarios();
    for &size in sizes {
        if size == 0 || size > s {
            return Err(Error::argument(format!("curve size {size} out of range 1..={s}")));
        }
    }
    let d = DistanceMatrix::from_metric(s, |i, j| problem.distance(i, j))?;
    let p = problem.probabilities().to_vec();

    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let subsets: Vec<(Vec<usize>, Vec<f64>)> = match mode {
            CurveMode::FastForward => {
                let r = fast_forward_select(&d, &p, size)?;
                vec![(r.selected, r.new_probabilities)]
            }
            CurveMode::Random { runs, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..runs.max(1))
                    .map(|_| {
                        let mut all: Vec<usize> = (0..s).collect();
                        all.shuffle(&mut rng);
                        let mut selected: Vec<usize> = all[..size].to_vec();
                        selected.sort_unstable();
                        let probs = redistribute(&d, &p, &selected);
                        (selected, probs)
                    })
                    .collect()
            }
        };

        let mut values = Vec::with_capacity(subsets.len());
        for (selected, probs) in subsets {
            let reduced = problem.build_model(&selected, &probs)?;
            let res = solve_bnc(&reduced, &CutPool::new(), &BncOptions::default())?;
            let value = match (&res.report.status, &res.incumbent) {
                (SolveStatus::Optimal, Some(point)) => {
                    let k = problem.num_first_stage_vars();
                    let fixed = fix_first_stage_and_resolve(problem, &point[..k], None)?;
                    fixed.report.objective
                }
                _ => f64::INFINITY,
            };
            values.push(value);
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        out.push(CurvePoint { size, min, mean, max });
    }
    Ok(out)
}

/// Nearest-selected probability redistribution, matching the fast-forward
/// rule (ties to the lowest selected index).
fn redistribute(d: &DistanceMatrix, p: &[f64], selected: &[usize]) -> Vec<f64> {
    let mut probs: Vec<f64> = selected.iter().map(|&i| p[i]).collect();
    for j in 0..p.len() {
        if selected.contains(&j) {
            continue;
        }
        let mut nearest = 0usize;
        for (k, &i) in selected.iter().enumerate() {
            if d.get(j, i) < d.get(j, selected[nearest]) - 1e-15 {
                nearest = k;
            }
        }
        probs[nearest] += p[j];
    }
    probs
}
