//! Instance loading and single-cell execution shared by solve and bench.

use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::ValueEnum;

use tulip_core::bnc::{solve_bnc, BncOptions, BncResult, CutPool};
use tulip_core::driver::{tulip_solve, TwoStageProblem};
use tulip_core::model::{relative_gap, CutOrigin, SolveReport, SolveStatus};
use tulip_core::scvrp::{
    build_scvrp_model, parse_scenario_lines, parse_tsplib_vrp, ScvrpInstance, ScvrpProblem,
};
use tulip_core::ssfp::{
    build_ssfp_cut_model, build_ssfp_flow_model, parse_ssfp_instance, SsfpInstance, SsfpProblem,
};
use tulip_core::Error;

use crate::record::Row;

#[derive(Debug, Clone)]
pub enum Instance {
    Scvrp(ScvrpInstance),
    Ssfp(SsfpInstance),
}

impl Instance {
    pub fn num_scenarios(&self) -> usize {
        match self {
            Instance::Scvrp(inst) => inst.scenarios.len(),
            Instance::Ssfp(inst) => inst.scenarios.len(),
        }
    }

    pub fn into_problem(self, beta: [f64; 3]) -> Result<Box<dyn TwoStageProblem>, Error> {
        Ok(match self {
            Instance::Scvrp(instance) => Box::new(ScvrpProblem { instance }),
            Instance::Ssfp(instance) => Box::new(SsfpProblem::new(instance, beta)?),
        })
    }
}

/// Reads either instance format. Network instances start with a
/// "SECTION Instance" block; routing instances are a TSPLIB block terminated
/// by EOF followed by scenario lines.
pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading instance {}", path.display()))?;
    let ctx = || format!("parsing {}", path.display());
    if text.lines().any(|l| l.trim_start().starts_with("SECTION Instance")) {
        return Ok(Instance::Ssfp(parse_ssfp_instance(&text).with_context(ctx)?));
    }
    let eof = text
        .lines()
        .position(|l| l.trim() == "EOF")
        .with_context(|| format!("{}: routing instance without EOF marker", path.display()))?;
    let lines: Vec<&str> = text.lines().collect();
    let head = lines[..=eof].join("\n");
    let tail = lines[eof + 1..].join("\n");
    let base = parse_tsplib_vrp(&head).with_context(ctx)?;
    let scenarios = parse_scenario_lines(&tail, base.dist.len()).with_context(ctx)?;
    Ok(Instance::Scvrp(ScvrpInstance::new(base.dist, base.capacity, scenarios).with_context(ctx)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Tulip,
    FlowDirect,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Tulip => "tulip",
            Method::FlowDirect => "flow_direct",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "tulip" => Ok(Method::Tulip),
            "flow_direct" => Ok(Method::FlowDirect),
            other => anyhow::bail!("unknown method {other}"),
        }
    }
}

/// One (instance, method) run.
pub struct Cell {
    pub id: String,
    pub instance: Instance,
    pub method: Method,
    pub fraction: f64,
    pub time_limit: Duration,
    pub seed: u64,
    pub param: String,
    pub beta: [f64; 3],
}

pub fn run_cell(cell: &Cell) -> Row {
    match solve_cell(cell) {
        Ok(res) => report_row(cell, &res.report),
        Err(e) => Row::error(cell.id.clone(), cell.method.name(), cell.seed, e.to_string()),
    }
}

fn solve_cell(cell: &Cell) -> Result<BncResult, Error> {
    let opts = BncOptions { time_limit: Some(cell.time_limit), event_log: None };
    match (&cell.instance, cell.method) {
        (Instance::Scvrp(inst), Method::Direct) => {
            solve_bnc(&build_scvrp_model(inst)?, &CutPool::new(), &opts)
        }
        (Instance::Scvrp(_), Method::FlowDirect) => {
            Err(Error::argument("flow_direct applies only to network instances"))
        }
        (Instance::Ssfp(inst), Method::Direct) => {
            solve_bnc(&build_ssfp_cut_model(inst)?, &CutPool::new(), &opts)
        }
        (Instance::Ssfp(inst), Method::FlowDirect) => {
            solve_bnc(&build_ssfp_flow_model(inst)?, &CutPool::new(), &opts)
        }
        (_, Method::Tulip) => {
            let problem = cell.instance.clone().into_problem(cell.beta)?;
            tulip_solve(problem.as_ref(), cell.fraction, Some(cell.time_limit))
        }
    }
}

fn report_row(cell: &Cell, report: &SolveReport) -> Row {
    let status = match report.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::TimeLimit => "time_limit",
        SolveStatus::Infeasible => "infeasible",
    };
    let gap = relative_gap(report.objective, report.bound) * 100.0;
    let cuts = |o: CutOrigin| report.cuts_added.get(&o).copied().unwrap_or(0);
    Row {
        instance: cell.id.clone(),
        method: cell.method.name().to_string(),
        scenarios: cell.instance.num_scenarios(),
        param: cell.param.clone(),
        seed: cell.seed,
        status: status.to_string(),
        objective: report.objective,
        bound: report.bound,
        gap_percent: gap,
        time_reduction: report.wall_time.reduction,
        time_root: report.wall_time.root,
        time_bnc: report.wall_time.branch_and_cut,
        nodes: report.nodes,
        cuts_subtour: cuts(CutOrigin::Subtour),
        cuts_capacity: cuts(CutOrigin::Capacity),
        cuts_connectivity: cuts(CutOrigin::Connectivity),
        cuts_transferred: report.cuts_transferred,
        tight_ratio: report.tight_ratio,
        message: String::new(),
    }
}
