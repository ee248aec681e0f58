//! Shared representation of linear programs, MILPs, cuts and two-stage
//! scenario structure.
//!
//! Everything here is plain data: problem adapters build these values, the
//! LP engine and branch-and-cut consume them. All types are immutable after
//! construction and safe to share across threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::Error;

/// Slack at or below this value classifies a cut as tight at a point.
pub const EPS_TIGHT: f64 = 1e-6;
/// Primal feasibility tolerance of the LP engine.
pub const EPS_FEAS: f64 = 1e-7;
/// Minimum violation for a separator to report a cut.
pub const EPS_VIOL: f64 = 1e-6;
/// A value within this distance of an integer counts as integral.
pub const EPS_INT: f64 = 1e-6;

/// Row or cut direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Sparse inequality left-hand side: `(column, coefficient)` pairs sorted by
/// column with duplicates merged at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    entries: Vec<(usize, f64)>,
}

impl SparseRow {
    /// Builds a row from arbitrary `(index, coefficient)` pairs. Entries are
    /// sorted by index, duplicate indices merged, and exact zeros dropped.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (j, c) in entries {
            match merged.last_mut() {
                Some((last, acc)) if *last == j => *acc += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        SparseRow { entries: merged }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(j, _)| j)
    }
}

/// Dot product of a sparse row with a dense point.
pub fn evaluate_row(row: &SparseRow, point: &[f64]) -> Result<f64, Error> {
    let mut acc = 0.0;
    for &(j, c) in row.entries() {
        let x = point
            .get(j)
            .ok_or_else(|| Error::structural(format!("row index {j} out of range for point of length {}", point.len())))?;
        acc += c * x;
    }
    Ok(acc)
}

/// Minimization LP in the canonical form used everywhere in this crate.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    /// Dense objective coefficients (minimized).
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    /// Upper bounds; `f64::INFINITY` marks an unbounded variable.
    pub upper: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, row: SparseRow, sense: Sense, rhs: f64) {
        debug_assert!(row.max_index().map_or(true, |j| j < self.num_vars));
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    /// Checks the structural invariants: column indices in range and
    /// `lower <= upper` per variable.
    pub fn validate(&self) -> Result<(), Error> {
        if self.objective.len() != self.num_vars
            || self.lower.len() != self.num_vars
            || self.upper.len() != self.num_vars
        {
            return Err(Error::structural("objective/bound vectors do not match num_vars"));
        }
        for j in 0..self.num_vars {
            if self.lower[j] > self.upper[j] {
                return Err(Error::structural(format!(
                    "variable {j}: lower bound {} exceeds upper bound {}",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.max_index().map_or(false, |j| j >= self.num_vars) {
                return Err(Error::structural(format!("row {i} references a column >= num_vars")));
            }
        }
        if self.senses.len() != self.rows.len() || self.rhs.len() != self.rows.len() {
            return Err(Error::structural("row/sense/rhs length mismatch"));
        }
        Ok(())
    }
}

/// Family a cut belongs to; used for reporting and dedup bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CutOrigin {
    Subtour,
    Capacity,
    Connectivity,
}

impl CutOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            CutOrigin::Subtour => "subtour",
            CutOrigin::Capacity => "capacity",
            CutOrigin::Connectivity => "connectivity",
        }
    }
}

/// A dynamically generated valid inequality.
///
/// `scenario` is 0 for first-stage cuts and `s >= 1` for cuts whose validity
/// depends on scenario `s`'s data. `aux` carries the origin-specific vertex
/// set (subtour/capacity set `Q` or connectivity cut-set `H`).
#[derive(Debug, Clone)]
pub struct Cut {
    pub row: SparseRow,
    pub sense: Sense,
    pub rhs: f64,
    pub origin: CutOrigin,
    pub scenario: usize,
    pub aux: Vec<usize>,
}

impl Cut {
    pub fn new(row: SparseRow, sense: Sense, rhs: f64, origin: CutOrigin, scenario: usize) -> Self {
        debug_assert!(!row.is_empty(), "cuts must have a non-empty row");
        debug_assert!(sense != Sense::Eq, "cuts are inequalities");
        Cut { row, sense, rhs, origin, scenario, aux: Vec::new() }
    }

    pub fn with_aux(mut self, aux: Vec<usize>) -> Self {
        self.aux = aux;
        self
    }
}

/// Signed slack of a cut at a point. Non-negative means satisfied; a value
/// at or below [`EPS_TIGHT`] means tight.
pub fn cut_slack(cut: &Cut, point: &[f64]) -> Result<f64, Error> {
    let lhs = evaluate_row(&cut.row, point)?;
    Ok(match cut.sense {
        Sense::Ge => lhs - cut.rhs,
        Sense::Le => cut.rhs - lhs,
        Sense::Eq => (lhs - cut.rhs).abs(),
    })
}

/// Per-variable metadata: which stage the variable belongs to (0 = first
/// stage) and a short role label for debugging and dumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMeta {
    pub stage: usize,
    pub role: String,
}

impl VarMeta {
    pub fn new(stage: usize, role: impl Into<String>) -> Self {
        VarMeta { stage, role: role.into() }
    }
}

/// Scenario probabilities plus per-scenario problem data.
#[derive(Debug, Clone)]
pub struct ScenarioSet<T> {
    probabilities: Vec<f64>,
    payload: Vec<T>,
}

impl<T> ScenarioSet<T> {
    pub fn new(probabilities: Vec<f64>, payload: Vec<T>) -> Result<Self, Error> {
        if probabilities.len() != payload.len() {
            return Err(Error::argument("scenario probability and payload counts differ"));
        }
        if probabilities.is_empty() {
            return Err(Error::argument("scenario set is empty"));
        }
        if probabilities.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::argument("scenario probabilities must be positive"));
        }
        // Compensated summation: plain folding drifts past the tolerance
        // for large scenario counts.
        let (mut sum, mut carry) = (0.0f64, 0.0f64);
        for &p in &probabilities {
            let y = p - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::argument(format!("scenario probabilities sum to {sum}, not 1")));
        }
        Ok(ScenarioSet { probabilities, payload })
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn payload(&self, s: usize) -> &T {
        &self.payload[s]
    }

    pub fn payloads(&self) -> &[T] {
        &self.payload
    }
}

/// Separation callback. Given a candidate point, returns cuts violated at
/// the point by more than [`EPS_VIOL`]; every returned cut must be valid for
/// all integral feasible solutions of the model it was registered on.
///
/// Implementations must be re-entrant: one instance may serve concurrent
/// solves of distinct model clones.
pub trait Separator: Send + Sync {
    fn name(&self) -> &'static str;
    fn separate(&self, point: &[f64], point_is_integral: bool) -> Vec<Cut>;
}

/// A MILP: an LP plus integrality marks, variable metadata and the
/// separators implementing its exponential constraint families.
#[derive(Clone)]
pub struct MilpModel {
    pub lp: LinearProgram,
    pub integral: Vec<bool>,
    pub var_meta: Vec<VarMeta>,
    pub separators: Vec<Arc<dyn Separator>>,
}

impl std::fmt::Debug for MilpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MilpModel")
            .field("num_vars", &self.lp.num_vars)
            .field("num_rows", &self.lp.num_rows())
            .field("separators", &self.separators.len())
            .finish()
    }
}

impl MilpModel {
    pub fn new(lp: LinearProgram, integral: Vec<bool>, var_meta: Vec<VarMeta>) -> Self {
        debug_assert_eq!(integral.len(), lp.num_vars);
        debug_assert_eq!(var_meta.len(), lp.num_vars);
        MilpModel { lp, integral, var_meta, separators: Vec::new() }
    }

    pub fn add_separator(&mut self, sep: Arc<dyn Separator>) {
        self.separators.push(sep);
    }

    /// True if every integral-marked variable of `point` is within
    /// [`EPS_INT`] of an integer.
    pub fn point_is_integral(&self, point: &[f64]) -> bool {
        self.integral
            .iter()
            .zip(point)
            .all(|(&m, &x)| !m || (x - x.round()).abs() <= EPS_INT)
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    Infeasible,
}

/// Wall-clock seconds spent in each pipeline phase.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimes {
    pub reduction: f64,
    pub root: f64,
    pub branch_and_cut: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.reduction + self.root + self.branch_and_cut
    }
}

/// Result of a MILP solve (direct or pipeline).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Incumbent objective; `f64::INFINITY` when no incumbent was found.
    pub objective: f64,
    /// Best dual bound; `f64::NEG_INFINITY` when nothing was proven.
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub cuts_added: BTreeMap<CutOrigin, usize>,
    /// Number of warm-start cuts installed (pipeline runs only).
    pub cuts_transferred: usize,
    /// Fraction of root cuts that were tight (pipeline runs only; 1.0 when
    /// the root produced no cuts).
    pub tight_ratio: f64,
    pub wall_time: PhaseTimes,
}

impl SolveReport {
    pub fn total_cuts(&self) -> usize {
        self.cuts_added.values().sum()
    }
}

/// Relative optimality gap used throughout: `(objective - bound)` scaled by
/// `max(|objective|, eps)`. Infinite when either side is missing.
pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    (objective - bound) / objective.abs().max(1e-9)
}

// ---------------------------------------------------------------------------
// Plain-text dump format
// ---------------------------------------------------------------------------
//
// Grammar (one directive per line, whitespace separated):
//
//   milp 1
//   vars <num_vars>
//   obj <c_0> ... <c_{n-1}>
//   var <j> <lower> <upper> <int|cont> <stage> <role>
//   row <le|ge|eq> <rhs> [<j>:<coef> ...]
//
// Floats use Rust's shortest round-trip notation; "inf" denotes an
// unbounded upper bound. Separators are not serialized.

/// Serializes a model to the plain-text dump format.
pub fn dump_model(model: &MilpModel) -> String {
    let lp = &model.lp;
    let mut out = String::new();
    out.push_str("milp 1\n");
    let _ = writeln!(out, "vars {}", lp.num_vars);
    out.push_str("obj");
    for c in &lp.objective {
        let _ = write!(out, " {}", fmt_float(*c));
    }
    out.push('\n');
    for j in 0..lp.num_vars {
        let _ = writeln!(
            out,
            "var {} {} {} {} {} {}",
            j,
            fmt_float(lp.lower[j]),
            fmt_float(lp.upper[j]),
            if model.integral[j] { "int" } else { "cont" },
            model.var_meta[j].stage,
            if model.var_meta[j].role.is_empty() { "-" } else { &model.var_meta[j].role },
        );
    }
    for i in 0..lp.num_rows() {
        let sense = match lp.senses[i] {
            Sense::Le => "le",
            Sense::Ge => "ge",
            Sense::Eq => "eq",
        };
        let _ = write!(out, "row {} {}", sense, fmt_float(lp.rhs[i]));
        for &(j, c) in lp.rows[i].entries() {
            let _ = write!(out, " {}:{}", j, fmt_float(c));
        }
        out.push('\n');
    }
    out
}

fn fmt_float(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn parse_float(s: &str, line: usize) -> Result<f64, Error> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::parse(line, format!("bad number {s:?}"))),
    }
}

/// Parses the plain-text dump format back into a model (without separators).
pub fn parse_model(text: &str) -> Result<MilpModel, Error> {
    let mut num_vars = None;
    let mut objective = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut integral = Vec::new();
    let mut meta = Vec::new();
    let mut rows = Vec::new();
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let head = tok.next().unwrap();
        match head {
            "milp" => {
                if tok.next() != Some("1") {
                    return Err(Error::parse(line_no, "unsupported dump version"));
                }
                saw_header = true;
            }
            "vars" => {
                let n: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(line_no, "vars expects a count"))?;
                num_vars = Some(n);
                lower = vec![0.0; n];
                upper = vec![f64::INFINITY; n];
                integral = vec![false; n];
                meta = vec![VarMeta::new(0, ""); n];
            }
            "obj" => {
                for s in tok {
                    objective.push(parse_float(s, line_no)?);
                }
            }
            "var" => {
                let j: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(line_no, "var expects an index"))?;
                let n = num_vars.ok_or_else(|| Error::parse(line_no, "var before vars"))?;
                if j >= n {
                    return Err(Error::parse(line_no, format!("var index {j} out of range")));
                }
                let lo = parse_float(tok.next().ok_or_else(|| Error::parse(line_no, "missing lower"))?, line_no)?;
                let hi = parse_float(tok.next().ok_or_else(|| Error::parse(line_no, "missing upper"))?, line_no)?;
                let kind = tok.next().ok_or_else(|| Error::parse(line_no, "missing int/cont"))?;
                let stage: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(line_no, "missing stage"))?;
                let role = tok.next().unwrap_or("-");
                lower[j] = lo;
                upper[j] = hi;
                integral[j] = match kind {
                    "int" => true,
                    "cont" => false,
                    _ => return Err(Error::parse(line_no, format!("bad kind {kind:?}"))),
                };
                meta[j] = VarMeta::new(stage, if role == "-" { "" } else { role });
            }
            "row" => {
                let sense = match tok.next() {
                    Some("le") => Sense::Le,
                    Some("ge") => Sense::Ge,
                    Some("eq") => Sense::Eq,
                    other => return Err(Error::parse(line_no, format!("bad sense {other:?}"))),
                };
                let r = parse_float(tok.next().ok_or_else(|| Error::parse(line_no, "missing rhs"))?, line_no)?;
                let mut entries = Vec::new();
                for term in tok {
                    let (j, c) = term
                        .split_once(':')
                        .ok_or_else(|| Error::parse(line_no, format!("bad term {term:?}")))?;
                    let j: usize = j.parse().map_err(|_| Error::parse(line_no, format!("bad column {j:?}")))?;
                    entries.push((j, parse_float(c, line_no)?));
                }
                rows.push(SparseRow::new(entries));
                senses.push(sense);
                rhs.push(r);
            }
            _ => return Err(Error::parse(line_no, format!("unknown directive {head:?}"))),
        }
    }

    if !saw_header {
        return Err(Error::parse(1, "missing 'milp 1' header"));
    }
    let n = num_vars.ok_or_else(|| Error::parse(1, "missing 'vars' directive"))?;
    if objective.len() != n {
        return Err(Error::parse(1, format!("objective has {} coefficients, expected {n}", objective.len())));
    }

    let lp = LinearProgram { num_vars: n, objective, lower, upper, rows, senses, rhs };
    lp.validate()?;
    Ok(MilpModel::new(lp, integral, meta))
}
