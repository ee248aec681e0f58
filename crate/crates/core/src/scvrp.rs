//! Stochastic capacitated vehicle routing adapter: model construction,
//! subtour and capacity separation, lognormal demand generation, a TSPLIB
//! subset reader and the L1 demand metric.
//!
//! City 0 is always the depot. Arc variables are directed: for each stage
//! (first stage x, then one y block per scenario) there is one binary per
//! ordered city pair.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::driver::TwoStageProblem;
use crate::error::Error;
use crate::flow::max_flow;
use crate::model::{
    Cut, CutOrigin, LinearProgram, MilpModel, ScenarioSet, Sense, Separator, SparseRow, VarMeta,
    EPS_VIOL,
};

/// Arc support threshold for fractional points.
const EPS_SUPPORT: f64 = 1e-9;

/// Variable layout shared by the model builder, the separators and the cut
/// transfer: block 0 is x over all ordered pairs, block 1+s is y for
/// scenario s, same arc order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcLayout {
    /// City count including the depot.
    pub n1: usize,
}

impl ArcLayout {
    pub fn num_arcs(&self) -> usize {
        self.n1 * (self.n1 - 1)
    }

    /// Index of arc (i, j) within a block, i != j.
    pub fn arc(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.n1 && j < self.n1);
        i * (self.n1 - 1) + if j < i { j } else { j - 1 }
    }

    pub fn x_var(&self, i: usize, j: usize) -> usize {
        self.arc(i, j)
    }

    /// y variable for local scenario block `s` (0-based).
    pub fn y_var(&self, s: usize, i: usize, j: usize) -> usize {
        (1 + s) * self.num_arcs() + self.arc(i, j)
    }

    pub fn block_of(&self, var: usize) -> usize {
        var / self.num_arcs()
    }
}

#[derive(Debug, Clone)]
pub struct ScvrpInstance {
    /// Symmetric distances with zero diagonal, depot at index 0.
    pub dist: Vec<Vec<f64>>,
    pub capacity: f64,
    /// Payload: one demand vector per scenario, entry 0 (depot) zero.
    pub scenarios: ScenarioSet<Vec<f64>>,
}

impl ScvrpInstance {
    pub fn new(
        dist: Vec<Vec<f64>>,
        capacity: f64,
        scenarios: ScenarioSet<Vec<f64>>,
    ) -> Result<Self, Error> {
        let n1 = dist.len();
        if n1 < 2 {
            return Err(Error::argument("instance needs a depot and at least one city"));
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n1 {
                return Err(Error::argument(format!("distance row {i} has wrong length")));
            }
            for (j, &v) in row.iter().enumerate() {
                if i == j && v != 0.0 {
                    return Err(Error::argument("distance diagonal must be zero"));
                }
                if i != j && !(v > 0.0) {
                    return Err(Error::argument(format!("distance ({i},{j}) must be positive")));
                }
                if (v - dist[j][i]).abs() > 1e-9 {
                    return Err(Error::argument("distance matrix must be symmetric"));
                }
            }
        }
        if !(capacity > 0.0) {
            return Err(Error::argument("capacity must be positive"));
        }
        for (s, b) in scenarios.payloads().iter().enumerate() {
            if b.len() != n1 {
                return Err(Error::argument(format!("scenario {s} demand vector has wrong length")));
            }
            if b[0] != 0.0 {
                return Err(Error::argument(format!("scenario {s} depot demand must be zero")));
            }
            for (i, &d) in b.iter().enumerate().skip(1) {
                if !(d > 0.0) {
                    return Err(Error::argument(format!("scenario {s} demand at city {i} must be positive")));
                }
                if d > capacity + 1e-9 {
                    return Err(Error::argument(format!(
                        "scenario {s} demand at city {i} exceeds the capacity"
                    )));
                }
            }
        }
        Ok(ScvrpInstance { dist, capacity, scenarios })
    }

    /// City count including the depot.
    pub fn num_cities(&self) -> usize {
        self.dist.len()
    }

    pub fn layout(&self) -> ArcLayout {
        ArcLayout { n1: self.dist.len() }
    }
}

/// Builds the stochastic routing model over a scenario subset: x carries no
/// objective cost, each y block is priced with its probability; degree
/// constraints hold per stage; y is linked to x on non-depot arcs only, so
/// recourse may insert extra depot visits.
pub fn build_scvrp_model_for(
    inst: &ScvrpInstance,
    scenario_indices: &[usize],
    probabilities: &[f64],
) -> Result<MilpModel, Error> {
    if scenario_indices.len() != probabilities.len() || scenario_indices.is_empty() {
        return Err(Error::argument("scenario subset and probabilities must match and be nonempty"));
    }
    let n1 = inst.num_cities();
    let layout = inst.layout();
    let a = layout.num_arcs();
    let s_count = scenario_indices.len();
    let num_vars = a * (1 + s_count);

    let mut lp = LinearProgram::new(num_vars);
    lp.upper = vec![1.0; num_vars];
    let mut meta = Vec::with_capacity(num_vars);
    for i in 0..n1 {
        for j in 0..n1 {
            if i != j {
                meta.push(VarMeta::new(0, format!("x_{i}_{j}")));
            }
        }
    }
    for (local, &orig) in scenario_indices.iter().enumerate() {
        for i in 0..n1 {
            for j in 0..n1 {
                if i != j {
                    lp.objective[layout.y_var(local, i, j)] =
                        probabilities[local] * inst.dist[i][j];
                    meta.push(VarMeta::new(1, format!("y{orig}_{i}_{j}")));
                }
            }
        }
    }

    // Degree constraints per stage: every city has one outgoing and one
    // incoming arc, the depot at least one of each.
    let add_degree = |lp: &mut LinearProgram, var: &dyn Fn(usize, usize) -> usize| {
        for i in 1..n1 {
            let out: Vec<(usize, f64)> = (0..n1).filter(|&j| j != i).map(|j| (var(i, j), 1.0)).collect();
            lp.add_row(SparseRow::new(out), Sense::Eq, 1.0);
            let inc: Vec<(usize, f64)> = (0..n1).filter(|&j| j != i).map(|j| (var(j, i), 1.0)).collect();
            lp.add_row(SparseRow::new(inc), Sense::Eq, 1.0);
        }
        let depot_out: Vec<(usize, f64)> = (1..n1).map(|j| (var(0, j), 1.0)).collect();
        lp.add_row(SparseRow::new(depot_out), Sense::Ge, 1.0);
        let depot_in: Vec<(usize, f64)> = (1..n1).map(|i| (var(i, 0), 1.0)).collect();
        lp.add_row(SparseRow::new(depot_in), Sense::Ge, 1.0);
    };
    add_degree(&mut lp, &|i, j| layout.x_var(i, j));
    for local in 0..s_count {
        add_degree(&mut lp, &|i, j| layout.y_var(local, i, j));
    }

    // Linking on non-depot arcs: y may only use an arc the plan uses.
    for local in 0..s_count {
        for i in 1..n1 {
            for j in 1..n1 {
                if i != j {
                    lp.add_row(
                        SparseRow::new(vec![
                            (layout.y_var(local, i, j), 1.0),
                            (layout.x_var(i, j), -1.0),
                        ]),
                        Sense::Le,
                        0.0,
                    );
                }
            }
        }
    }

    let mut model = MilpModel::new(lp, vec![true; num_vars], meta);
    model.add_separator(Arc::new(SubtourSeparator { layout }));
    for (local, &orig) in scenario_indices.iter().enumerate() {
        model.add_separator(Arc::new(CapacitySeparator {
            layout,
            local,
            scenario: orig,
            demands: inst.scenarios.payload(orig).clone(),
            capacity: inst.capacity,
        }));
    }
    Ok(model)
}

/// Direct formulation over the full scenario set.
pub fn build_scvrp_model(inst: &ScvrpInstance) -> Result<MilpModel, Error> {
    let all: Vec<usize> = (0..inst.scenarios.len()).collect();
    build_scvrp_model_for(inst, &all, inst.scenarios.probabilities())
}

/// Subtour elimination on the first-stage arcs. Integral points: connected
/// components of the support graph that miss the depot. Fractional points:
/// depot-to-city max flows; a sink side with inflow below 1 violates the
/// constraint (by the degree rows, sum of arcs inside Q equals |Q| minus the
/// inflow of Q).
pub struct SubtourSeparator {
    pub layout: ArcLayout,
}

impl Separator for SubtourSeparator {
    fn name(&self) -> &'static str {
        "subtour"
    }

    fn separate(&self, point: &[f64], point_is_integral: bool) -> Vec<Cut> {
        let n1 = self.layout.n1;
        let xv = |i: usize, j: usize| point[self.layout.x_var(i, j)];
        let mut cuts = Vec::new();

        if point_is_integral {
            for q in components_missing_depot(n1, &|i, j| xv(i, j) > 0.5) {
                cuts.push(self.subtour_cut(&q, point));
            }
        } else {
            let mut cap = vec![vec![0.0; n1]; n1];
            for i in 0..n1 {
                for j in 0..n1 {
                    if i != j {
                        cap[i][j] = xv(i, j).max(0.0);
                    }
                }
            }
            let mut seen: std::collections::HashSet<Vec<usize>> = Default::default();
            for v in 1..n1 {
                let f = match max_flow(&cap, 0, v) {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                if f.value < 1.0 - EPS_VIOL {
                    let q: Vec<usize> = f.sink_side;
                    if seen.insert(q.clone()) {
                        let cut = self.subtour_cut(&q, point);
                        // Only emit when actually violated at the point.
                        if violated_le(&cut, point) {
                            cuts.push(cut);
                        }
                    }
                }
            }
        }
        cuts
    }
}

impl SubtourSeparator {
    fn subtour_cut(&self, q: &[usize], _point: &[f64]) -> Cut {
        let mut entries = Vec::new();
        for &i in q {
            for &j in q {
                if i != j {
                    entries.push((self.layout.x_var(i, j), 1.0));
                }
            }
        }
        Cut::new(
            SparseRow::new(entries),
            Sense::Le,
            q.len() as f64 - 1.0,
            CutOrigin::Subtour,
            0,
        )
        .with_aux(q.to_vec())
    }
}

fn violated_le(cut: &Cut, point: &[f64]) -> bool {
    let lhs: f64 = cut.row.entries().iter().map(|&(j, c)| c * point[j]).sum();
    match cut.sense {
        Sense::Le => lhs > cut.rhs + EPS_VIOL,
        Sense::Ge => lhs < cut.rhs - EPS_VIOL,
        Sense::Eq => (lhs - cut.rhs).abs() > EPS_VIOL,
    }
}

/// Connected components (undirected view) of the support graph, skipping the
/// component containing the depot and isolated vertices.
fn components_missing_depot(n1: usize, has_arc: &dyn Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n1).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut touched = vec![false; n1];
    for i in 0..n1 {
        for j in 0..n1 {
            if i != j && has_arc(i, j) {
                touched[i] = true;
                touched[j] = true;
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let depot_root = find(&mut parent, 0);
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in 1..n1 {
        if touched[v] {
            let r = find(&mut parent, v);
            if r != depot_root {
                groups.entry(r).or_default().push(v);
            }
        }
    }
    groups.into_values().collect()
}

/// Rounded-capacity cuts on one scenario's y block: a city set Q must be
/// crossed at least 2 * ceil(demand(Q) / C) times. Integral candidates are
/// checked per trip of the y support graph; fractional candidates use the
/// components of the first-stage support graph as candidate sets.
pub struct CapacitySeparator {
    pub layout: ArcLayout,
    /// Block index within the model being solved.
    pub local: usize,
    /// Original scenario index (recorded on emitted cuts).
    pub scenario: usize,
    pub demands: Vec<f64>,
    pub capacity: f64,
}

impl Separator for CapacitySeparator {
    fn name(&self) -> &'static str {
        "capacity"
    }

    fn separate(&self, point: &[f64], point_is_integral: bool) -> Vec<Cut> {
        let n1 = self.layout.n1;
        let yv = |i: usize, j: usize| point[self.layout.y_var(self.local, i, j)];
        let mut candidates: Vec<Vec<usize>> = Vec::new();

        if point_is_integral {
            // Depot-rooted trips: each non-depot city has a unique successor.
            let mut succ = vec![usize::MAX; n1];
            let mut depot_heads = Vec::new();
            for i in 0..n1 {
                for j in 0..n1 {
                    if i != j && yv(i, j) > 0.5 {
                        if i == 0 {
                            depot_heads.push(j);
                        } else {
                            succ[i] = j;
                        }
                    }
                }
            }
            let mut assigned = vec![false; n1];
            for &head in &depot_heads {
                let mut q = Vec::new();
                let mut v = head;
                while v != 0 && v != usize::MAX && !assigned[v] {
                    assigned[v] = true;
                    q.push(v);
                    v = succ[v];
                }
                if !q.is_empty() {
                    candidates.push(q);
                }
            }
            // Cycles that never touch the depot.
            for start in 1..n1 {
                if assigned[start] || succ[start] == usize::MAX {
                    continue;
                }
                let mut q = Vec::new();
                let mut v = start;
                while v != 0 && v != usize::MAX && !assigned[v] {
                    assigned[v] = true;
                    q.push(v);
                    v = succ[v];
                }
                if !q.is_empty() {
                    candidates.push(q);
                }
            }
        } else {
            let xv = |i: usize, j: usize| point[self.layout.x_var(i, j)];
            candidates = components_missing_depot(n1, &|i, j| xv(i, j) > EPS_SUPPORT);
            // Components attached to the depot still matter here: take the
            // whole support graph's depot component without the depot.
            let mut in_other: Vec<bool> = vec![false; n1];
            for q in &candidates {
                for &v in q {
                    in_other[v] = true;
                }
            }
            let depot_side: Vec<usize> = (1..n1)
                .filter(|&v| {
                    !in_other[v]
                        && (0..n1).any(|u| u != v && (xv(u, v) > EPS_SUPPORT || xv(v, u) > EPS_SUPPORT))
                })
                .collect();
            if !depot_side.is_empty() {
                candidates.push(depot_side);
            }
        }

        let mut cuts = Vec::new();
        for q in candidates {
            if q.is_empty() || q.contains(&0) {
                continue;
            }
            let demand: f64 = q.iter().map(|&v| self.demands[v]).sum();
            let rhs = 2.0 * (demand / self.capacity).ceil();
            let crossing: f64 = q
                .iter()
                .map(|&i| {
                    (0..n1)
                        .filter(|&j| j != i && !q.contains(&j))
                        .map(|j| yv(i, j) + yv(j, i))
                        .sum::<f64>()
                })
                .sum();
            if crossing < rhs - EPS_VIOL {
                let mut entries = Vec::new();
                for &i in &q {
                    for j in 0..n1 {
                        if j != i && !q.contains(&j) {
                            entries.push((self.layout.y_var(self.local, i, j), 1.0));
                            entries.push((self.layout.y_var(self.local, j, i), 1.0));
                        }
                    }
                }
                cuts.push(
                    Cut::new(SparseRow::new(entries), Sense::Ge, rhs, CutOrigin::Capacity, self.scenario + 1)
                        .with_aux(q.clone()),
                );
            }
        }
        cuts
    }
}

/// Deterministic base data as read from a TSPLIB-style file.
#[derive(Debug, Clone)]
pub struct ScvrpBase {
    pub dist: Vec<Vec<f64>>,
    pub capacity: f64,
    /// Deterministic demands, depot entry zero.
    pub demands: Vec<f64>,
}

/// Draws S lognormal demand scenarios around the base demands with variance
/// alpha times the mean (moment matching), then raises the capacity to the
/// largest sampled demand if needed. Equiprobable scenarios; deterministic
/// for a fixed seed.
pub fn generate_demands(
    base: &ScvrpBase,
    alpha: f64,
    s_count: usize,
    seed: u64,
) -> Result<ScvrpInstance, Error> {
    if !(alpha > 0.0) {
        return Err(Error::argument("alpha must be positive"));
    }
    if s_count == 0 {
        return Err(Error::argument("need at least one scenario"));
    }
    let n1 = base.demands.len();
    for (i, &b) in base.demands.iter().enumerate().skip(1) {
        if !(b > 0.0) {
            return Err(Error::argument(format!("base demand at city {i} must be positive")));
        }
    }
    // Integer granularity is only kept for clearly integer-scaled instances.
    let round_draws = base.demands[1..]
        .iter()
        .all(|&b| b.fract() == 0.0 && b >= 10.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut payload = Vec::with_capacity(s_count);
    let mut max_demand: f64 = 0.0;
    for _ in 0..s_count {
        let mut b = vec![0.0; n1];
        for i in 1..n1 {
            let m = base.demands[i];
            let v = alpha * m;
            let sigma2 = (1.0 + v / (m * m)).ln();
            let mu = m.ln() - sigma2 / 2.0;
            let draw = LogNormal::new(mu, sigma2.sqrt())
                .map_err(|e| Error::numerical(format!("lognormal parameters invalid: {e}")))?
                .sample(&mut rng);
            b[i] = if round_draws { draw.round().max(1.0) } else { draw };
            max_demand = max_demand.max(b[i]);
        }
        payload.push(b);
    }
    let probabilities = vec![1.0 / s_count as f64; s_count];
    let scenarios = ScenarioSet::new(probabilities, payload)?;
    ScvrpInstance::new(base.dist.clone(), base.capacity.max(max_demand), scenarios)
}

/// L1 distance between two scenarios' demand vectors.
pub fn scvrp_distance(inst: &ScvrpInstance, i: usize, j: usize) -> f64 {
    inst.scenarios
        .payload(i)
        .iter()
        .zip(inst.scenarios.payload(j))
        .map(|(&a, &b)| (a - b).abs())
        .sum()
}

// ---------------------------------------------------------------------------
// TSPLIB-subset reader
// ---------------------------------------------------------------------------
//
// Recognized keywords: DIMENSION, CAPACITY, EDGE_WEIGHT_TYPE (EUC_2D or
// EXPLICIT), EDGE_WEIGHT_FORMAT (FULL_MATRIX), NODE_COORD_SECTION,
// EDGE_WEIGHT_SECTION, DEMAND_SECTION, DEPOT_SECTION, EOF. Node ids are
// 1-based in the file; the depot is renumbered to 0 on output.

pub fn parse_tsplib_vrp(text: &str) -> Result<ScvrpBase, Error> {
    let lines: Vec<&str> = text.lines().collect();
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<f64> = None;
    let mut weight_type: Option<String> = None;
    let mut weight_format: Option<String> = None;
    let mut coords: Option<Vec<(f64, f64)>> = None;
    let mut matrix: Option<Vec<Vec<f64>>> = None;
    let mut demands: Option<Vec<f64>> = None;
    let mut depot: Option<usize> = None;

    let mut idx = 0usize;
    while idx < lines.len() {
        let lineno = idx + 1;
        let line = lines[idx].trim();
        idx += 1;
        if line.is_empty() {
            continue;
        }
        let (keyword, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim().to_uppercase(), v.trim().to_string()),
            None => (line.to_uppercase(), String::new()),
        };
        match keyword.as_str() {
            "NAME" | "COMMENT" | "TYPE" => {}
            "DIMENSION" => {
                dimension = Some(value.parse().map_err(|_| Error::parse(lineno, "bad DIMENSION"))?)
            }
            "CAPACITY" => {
                capacity = Some(value.parse().map_err(|_| Error::parse(lineno, "bad CAPACITY"))?)
            }
            "EDGE_WEIGHT_TYPE" => weight_type = Some(value.to_uppercase()),
            "EDGE_WEIGHT_FORMAT" => weight_format = Some(value.to_uppercase()),
            "NODE_COORD_SECTION" => {
                let n = dimension.ok_or_else(|| Error::parse(lineno, "DIMENSION must precede NODE_COORD_SECTION"))?;
                let mut c = vec![(0.0, 0.0); n];
                for k in 0..n {
                    let lno = idx + 1;
                    let parts: Vec<&str> = lines
                        .get(idx)
                        .ok_or_else(|| Error::parse(lno, "unexpected end of coordinates"))?
                        .split_whitespace()
                        .collect();
                    idx += 1;
                    if parts.len() != 3 {
                        return Err(Error::parse(lno, "expected: id x y"));
                    }
                    let id: usize = parts[0].parse().map_err(|_| Error::parse(lno, "bad node id"))?;
                    if id != k + 1 {
                        return Err(Error::parse(lno, format!("expected node id {}", k + 1)));
                    }
                    let x: f64 = parts[1].parse().map_err(|_| Error::parse(lno, "bad x coordinate"))?;
                    let y: f64 = parts[2].parse().map_err(|_| Error::parse(lno, "bad y coordinate"))?;
                    c[k] = (x, y);
                }
                coords = Some(c);
            }
            "EDGE_WEIGHT_SECTION" => {
                let n = dimension.ok_or_else(|| Error::parse(lineno, "DIMENSION must precede EDGE_WEIGHT_SECTION"))?;
                let mut values = Vec::with_capacity(n * n);
                while values.len() < n * n {
                    let lno = idx + 1;
                    let line = lines
                        .get(idx)
                        .ok_or_else(|| Error::parse(lno, "unexpected end of edge weights"))?;
                    idx += 1;
                    for tok in line.split_whitespace() {
                        let v: f64 = tok.parse().map_err(|_| Error::parse(lno, "bad edge weight"))?;
                        values.push(v);
                    }
                }
                if values.len() != n * n {
                    return Err(Error::parse(lineno, "edge weight count does not match DIMENSION^2"));
                }
                matrix = Some(values.chunks(n).map(|c| c.to_vec()).collect());
            }
            "DEMAND_SECTION" => {
                let n = dimension.ok_or_else(|| Error::parse(lineno, "DIMENSION must precede DEMAND_SECTION"))?;
                let mut d = vec![0.0; n];
                for k in 0..n {
                    let lno = idx + 1;
                    let parts: Vec<&str> = lines
                        .get(idx)
                        .ok_or_else(|| Error::parse(lno, "unexpected end of demands"))?
                        .split_whitespace()
                        .collect();
                    idx += 1;
                    if parts.len() != 2 {
                        return Err(Error::parse(lno, "expected: id demand"));
                    }
                    let id: usize = parts[0].parse().map_err(|_| Error::parse(lno, "bad node id"))?;
                    if id != k + 1 {
                        return Err(Error::parse(lno, format!("expected node id {}", k + 1)));
                    }
                    d[k] = parts[1].parse().map_err(|_| Error::parse(lno, "bad demand"))?;
                }
                demands = Some(d);
            }
            "DEPOT_SECTION" => {
                let lno = idx + 1;
                let first = lines
                    .get(idx)
                    .ok_or_else(|| Error::parse(lno, "unexpected end of depot section"))?
                    .trim();
                idx += 1;
                let id: i64 = first.parse().map_err(|_| Error::parse(lno, "bad depot id"))?;
                if id < 1 {
                    return Err(Error::parse(lno, "depot id must be positive"));
                }
                depot = Some(id as usize - 1);
                // Terminator line (-1) is optional.
                if lines.get(idx).map(|l| l.trim()) == Some("-1") {
                    idx += 1;
                }
            }
            "EOF" => break,
            other => return Err(Error::parse(lineno, format!("unknown keyword {other}"))),
        }
    }

    let n = dimension.ok_or_else(|| Error::parse(0, "missing DIMENSION"))?;
    let capacity = capacity.ok_or_else(|| Error::parse(0, "missing CAPACITY"))?;
    let demands = demands.ok_or_else(|| Error::parse(0, "missing DEMAND_SECTION"))?;
    let depot = depot.ok_or_else(|| Error::parse(0, "missing DEPOT_SECTION"))?;
    if depot >= n {
        return Err(Error::parse(0, "depot id out of range"));
    }

    let dist = match weight_type.as_deref() {
        Some("EUC_2D") | None => {
            let coords = coords.ok_or_else(|| Error::parse(0, "missing NODE_COORD_SECTION"))?;
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let dx = coords[i].0 - coords[j].0;
                        let dy = coords[i].1 - coords[j].1;
                        d[i][j] = (dx * dx + dy * dy).sqrt().round();
                    }
                }
            }
            d
        }
        Some("EXPLICIT") => {
            if weight_format.as_deref() != Some("FULL_MATRIX") {
                return Err(Error::parse(0, "EXPLICIT weights require EDGE_WEIGHT_FORMAT: FULL_MATRIX"));
            }
            matrix.ok_or_else(|| Error::parse(0, "missing EDGE_WEIGHT_SECTION"))?
        }
        Some(other) => return Err(Error::parse(0, format!("unsupported EDGE_WEIGHT_TYPE {other}"))),
    };

    // Renumber so the depot becomes node 0: depot first, rest in file order.
    let order: Vec<usize> = std::iter::once(depot)
        .chain((0..n).filter(|&v| v != depot))
        .collect();
    let dist_out: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| order.iter().map(|&j| dist[i][j]).collect())
        .collect();
    let demands_out: Vec<f64> = order.iter().map(|&i| demands[i]).collect();
    if demands_out[0] != 0.0 {
        return Err(Error::parse(0, "depot demand must be zero"));
    }

    Ok(ScvrpBase { dist: dist_out, capacity, demands: demands_out })
}

/// Parses the scenario sidecar format: one line per scenario with
/// "p b_1 ... b_n" (depot demand implied zero). `n1` counts the depot.
pub fn parse_scenario_lines(text: &str, n1: usize) -> Result<ScenarioSet<Vec<f64>>, Error> {
    let mut probabilities = Vec::new();
    let mut payload = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = k + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != n1 {
            return Err(Error::parse(lineno, format!("expected probability plus {} demands", n1 - 1)));
        }
        let p: f64 = parts[0].parse().map_err(|_| Error::parse(lineno, "bad probability"))?;
        let mut b = vec![0.0; n1];
        for (i, tok) in parts[1..].iter().enumerate() {
            b[i + 1] = tok.parse().map_err(|_| Error::parse(lineno, "bad demand"))?;
        }
        probabilities.push(p);
        payload.push(b);
    }
    ScenarioSet::new(probabilities, payload)
}

/// Inverse of [`parse_scenario_lines`].
pub fn format_scenario_lines(scenarios: &ScenarioSet<Vec<f64>>) -> String {
    let mut out = String::new();
    for (s, b) in scenarios.payloads().iter().enumerate() {
        out.push_str(&format!("{}", scenarios.probabilities()[s]));
        for &d in &b[1..] {
            out.push_str(&format!(" {d}"));
        }
        out.push('\n');
    }
    out
}

/// [`TwoStageProblem`] wrapper for an SCVRP instance.
#[derive(Debug, Clone)]
pub struct ScvrpProblem {
    pub instance: ScvrpInstance,
}

impl TwoStageProblem for ScvrpProblem {
    fn num_scenarios(&self) -> usize {
        self.instance.scenarios.len()
    }

    fn probabilities(&self) -> &[f64] {
        self.instance.scenarios.probabilities()
    }

    fn build_model(&self, scenarios: &[usize], probabilities: &[f64]) -> Result<MilpModel, Error> {
        build_scvrp_model_for(&self.instance, scenarios, probabilities)
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        scvrp_distance(&self.instance, i, j)
    }

    fn transfer_cut(&self, cut: &Cut, selected: &[usize]) -> Result<Cut, Error> {
        let layout = self.instance.layout();
        let a = layout.num_arcs();
        if cut.scenario == 0 {
            return Ok(cut.clone()); // first-stage rows line up exactly
        }
        // The separator already records the original scenario; shift each
        // variable from the local block to the original one.
        let orig = cut.scenario - 1;
        let local = selected
            .iter()
            .position(|&s| s == orig)
            .ok_or_else(|| Error::structural("cut references a scenario outside the reduction"))?;
        let shift = |var: usize| -> Result<usize, Error> {
            if layout.block_of(var) != 1 + local {
                return Err(Error::structural("second-stage cut touches a foreign block"));
            }
            Ok(var + (orig - local) * a)
        };
        let mut entries = Vec::with_capacity(cut.row.entries().len());
        for &(j, c) in cut.row.entries() {
            entries.push((shift(j)?, c));
        }
        let mut out = Cut::new(SparseRow::new(entries), cut.sense, cut.rhs, cut.origin, cut.scenario);
        out.aux = cut.aux.clone();
        Ok(out)
    }

    fn num_first_stage_vars(&self) -> usize {
        self.instance.layout().num_arcs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_dist(n1: usize) -> Vec<Vec<f64>> {
        // Cities on a line at unit spacing; strictly positive off-diagonal.
        (0..n1)
            .map(|i| (0..n1).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect()
    }

    fn toy_instance(demand_sets: Vec<Vec<f64>>, capacity: f64) -> ScvrpInstance {
        let s = demand_sets.len();
        let n1 = demand_sets[0].len();
        let scenarios = ScenarioSet::new(vec![1.0 / s as f64; s], demand_sets).unwrap();
        ScvrpInstance::new(grid_dist(n1), capacity, scenarios).unwrap()
    }

    #[test]
    fn variable_count_matches_formula() {
        let inst = toy_instance(vec![vec![0.0, 1.0, 1.0, 1.0], vec![0.0, 2.0, 2.0, 2.0]], 10.0);
        let model = build_scvrp_model(&inst).unwrap();
        // (n+1) * n directed pairs per stage, one x block plus S y blocks.
        assert_eq!(model.lp.num_vars, 4 * 3 * (1 + 2));
    }

    #[test]
    fn arc_layout_roundtrip() {
        let layout = ArcLayout { n1: 5 };
        let mut seen = std::collections::HashSet::new();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!(seen.insert(layout.arc(i, j)));
                }
            }
        }
        assert_eq!(seen.len(), layout.num_arcs());
        assert!(seen.iter().all(|&v| v < layout.num_arcs()));
    }

    #[test]
    fn demand_distance_is_l1() {
        let inst = toy_instance(vec![vec![0.0, 2.0, 3.0], vec![0.0, 4.0, 1.0]], 10.0);
        assert_eq!(scvrp_distance(&inst, 0, 1), 4.0);
        assert_eq!(scvrp_distance(&inst, 1, 0), 4.0);
        assert_eq!(scvrp_distance(&inst, 0, 0), 0.0);
    }

    fn integral_point(model: &MilpModel, ones: &[usize]) -> Vec<f64> {
        let mut p = vec![0.0; model.lp.num_vars];
        for &v in ones {
            p[v] = 1.0;
        }
        p
    }

    #[test]
    fn subtour_single_tour_clean() {
        let inst = toy_instance(vec![vec![0.0, 1.0, 1.0, 1.0]], 10.0);
        let model = build_scvrp_model(&inst).unwrap();
        let l = inst.layout();
        let sep = SubtourSeparator { layout: l };
        // 0 -> 1 -> 2 -> 3 -> 0.
        let point = integral_point(&model, &[l.x_var(0, 1), l.x_var(1, 2), l.x_var(2, 3), l.x_var(3, 0)]);
        assert!(sep.separate(&point, true).is_empty());
    }

    #[test]
    fn subtour_detects_detached_cycle() {
        let inst = toy_instance(vec![vec![0.0, 1.0, 1.0, 1.0]], 10.0);
        let model = build_scvrp_model(&inst).unwrap();
        let l = inst.layout();
        let sep = SubtourSeparator { layout: l };
        // Cycles {0,1} and {2,3}.
        let point = integral_point(&model, &[l.x_var(0, 1), l.x_var(1, 0), l.x_var(2, 3), l.x_var(3, 2)]);
        let cuts = sep.separate(&point, true);
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].aux, vec![2, 3]);
        assert_eq!(cuts[0].rhs, 1.0);
        assert_eq!(cuts[0].sense, Sense::Le);
    }

    #[test]
    fn subtour_fractional_two_cycle() {
        let inst = toy_instance(vec![vec![0.0, 1.0, 1.0, 1.0]], 10.0);
        let model = build_scvrp_model(&inst).unwrap();
        let l = inst.layout();
        let sep = SubtourSeparator { layout: l };
        let mut point = vec![0.0; model.lp.num_vars];
        point[l.x_var(2, 3)] = 1.0;
        point[l.x_var(3, 2)] = 1.0;
        point[l.x_var(0, 1)] = 1.0;
        point[l.x_var(1, 0)] = 1.0;
        let cuts = sep.separate(&point, false);
        assert!(cuts.iter().any(|c| c.aux == vec![2, 3]));
    }

    #[test]
    fn capacity_rhs_uses_rounded_demand() {
        // One tour 0 -> 1 -> 2 -> 0 with demands 7, 7 and capacity 10:
        // crossing degree 2 < 2 * ceil(14 / 10) = 4.
        let inst = toy_instance(vec![vec![0.0, 7.0, 7.0]], 10.0);
        let model = build_scvrp_model(&inst).unwrap();
        let l = inst.layout();
        let sep = CapacitySeparator {
            layout: l,
            local: 0,
            scenario: 0,
            demands: inst.scenarios.payload(0).clone(),
            capacity: inst.capacity,
        };
        let point = integral_point(
            &model,
            &[l.y_var(0, 0, 1), l.y_var(0, 1, 2), l.y_var(0, 2, 0)],
        );
        let cuts = sep.separate(&point, true);
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].rhs, 4.0);
        assert_eq!(cuts[0].sense, Sense::Ge);
        assert_eq!(cuts[0].scenario, 1);
    }

    #[test]
    fn capacity_exact_fit_is_clean() {
        let inst = toy_instance(vec![vec![0.0, 5.0, 5.0]], 10.0);
        let model = build_scvrp_model(&inst).unwrap();
        let l = inst.layout();
        let sep = CapacitySeparator {
            layout: l,
            local: 0,
            scenario: 0,
            demands: inst.scenarios.payload(0).clone(),
            capacity: inst.capacity,
        };
        let point = integral_point(
            &model,
            &[l.y_var(0, 0, 1), l.y_var(0, 1, 2), l.y_var(0, 2, 0)],
        );
        assert!(sep.separate(&point, true).is_empty());
    }

    #[test]
    fn generate_demands_moment_matching() {
        let base = ScvrpBase {
            dist: grid_dist(2),
            capacity: 10.0,
            demands: vec![0.0, 2.0],
        };
        let inst = generate_demands(&base, 0.05, 100_000, 7).unwrap();
        let mean: f64 = inst
            .scenarios
            .payloads()
            .iter()
            .map(|b| b[1])
            .sum::<f64>()
            / inst.scenarios.len() as f64;
        assert!((mean - 2.0).abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn generate_demands_vanishing_variance() {
        let base = ScvrpBase {
            dist: grid_dist(3),
            capacity: 10.0,
            demands: vec![0.0, 2.0, 5.0],
        };
        let inst = generate_demands(&base, 1e-9, 50, 3).unwrap();
        for b in inst.scenarios.payloads() {
            assert!((b[1] - 2.0).abs() / 2.0 < 1e-3);
            assert!((b[2] - 5.0).abs() / 5.0 < 1e-3);
        }
    }

    #[test]
    fn generate_demands_deterministic_and_capped() {
        let base = ScvrpBase {
            dist: grid_dist(4),
            capacity: 3.0,
            demands: vec![0.0, 1.0, 1.0, 1.0],
        };
        let a = generate_demands(&base, 1.0, 20, 42).unwrap();
        let b = generate_demands(&base, 1.0, 20, 42).unwrap();
        assert_eq!(a.scenarios.payloads(), b.scenarios.payloads());
        let max = a
            .scenarios
            .payloads()
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(0.0f64, f64::max);
        assert!(a.capacity >= max);
        let c = generate_demands(&base, 1.0, 20, 43).unwrap();
        assert_ne!(a.scenarios.payloads(), c.scenarios.payloads());
    }

    #[test]
    fn parses_euclidean_file() {
        let text = "NAME: toy\nTYPE: CVRP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: EUC_2D\nCAPACITY: 5\nNODE_COORD_SECTION\n1 0 0\n2 3 4\n3 0 8\nDEMAND_SECTION\n1 0\n2 2\n3 2\nDEPOT_SECTION\n1\n-1\nEOF\n";
        let base = parse_tsplib_vrp(text).unwrap();
        assert_eq!(base.dist[0][1], 5.0);
        assert_eq!(base.dist[1][2], 5.0);
        assert_eq!(base.dist[0][2], 8.0);
        assert_eq!(base.capacity, 5.0);
        assert_eq!(base.demands, vec![0.0, 2.0, 2.0]);
    }

    #[test]
    fn parses_explicit_matrix_and_renumbers_depot() {
        let text = "DIMENSION: 3\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: FULL_MATRIX\nCAPACITY: 4\nEDGE_WEIGHT_SECTION\n0 2 3\n2 0 4\n3 4 0\nDEMAND_SECTION\n1 1\n2 0\n3 1\nDEPOT_SECTION\n2\n-1\nEOF\n";
        let base = parse_tsplib_vrp(text).unwrap();
        // Depot was file node 2; new order is (2, 1, 3).
        assert_eq!(base.demands, vec![0.0, 1.0, 1.0]);
        assert_eq!(base.dist[0][1], 2.0);
        assert_eq!(base.dist[0][2], 4.0);
        assert_eq!(base.dist[1][2], 3.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "DIMENSION: 3\nCAPACITY: 5\nNODE_COORD_SECTION\n1 0 0\n2 oops 4\n3 0 8\nEOF\n";
        match parse_tsplib_vrp(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn scenario_lines_roundtrip() {
        let scenarios = ScenarioSet::new(
            vec![0.25, 0.75],
            vec![vec![0.0, 1.5, 2.0], vec![0.0, 3.0, 1.0]],
        )
        .unwrap();
        let text = format_scenario_lines(&scenarios);
        let parsed = parse_scenario_lines(&text, 3).unwrap();
        assert_eq!(parsed.probabilities(), scenarios.probabilities());
        assert_eq!(parsed.payloads(), scenarios.payloads());
    }

    #[test]
    fn transfer_moves_capacity_cut_to_original_block() {
        let inst = toy_instance(
            vec![vec![0.0, 1.0, 1.0], vec![0.0, 2.0, 2.0], vec![0.0, 3.0, 3.0]],
            10.0,
        );
        let problem = ScvrpProblem { instance: inst };
        let l = problem.instance.layout();
        // Cut generated on a reduced model where original scenario 2 sits in
        // local block 0.
        let cut = Cut::new(
            SparseRow::new(vec![(l.y_var(0, 1, 0), 1.0), (l.y_var(0, 0, 1), 1.0)]),
            Sense::Ge,
            2.0,
            CutOrigin::Capacity,
            3,
        );
        let moved = problem.transfer_cut(&cut, &[2]).unwrap();
        let vars: Vec<usize> = moved.row.entries().iter().map(|&(j, _)| j).collect();
        assert!(vars.contains(&l.y_var(2, 1, 0)));
        assert!(vars.contains(&l.y_var(2, 0, 1)));
        // First-stage cuts pass through untouched.
        let sub = Cut::new(SparseRow::new(vec![(l.x_var(1, 2), 1.0)]), Sense::Le, 0.0, CutOrigin::Subtour, 0);
        let same = problem.transfer_cut(&sub, &[2]).unwrap();
        assert_eq!(same.row.entries(), sub.row.entries());
    }
}
