//! Stochastic Steiner forest packing adapter: cut-based and flow-based model
//! construction, max-flow connectivity separation with creep flows and back
//! cuts, the three scenario distance metrics, a SteinLib-subset reader and
//! the instance adaptation used by the benchmarks.
//!
//! Variables are grouped into per-stage blocks (first stage, then one block
//! per scenario). Within a block the order is: installation variables x by
//! (type, edge), aggregate flow-use variables y by (type, arc), arborescence
//! variables y_k by (group, type, arc), and root assignment variables z for
//! group pairs (k, l) with l >= k. Arc 2e runs along edge e from its lower
//! endpoint, arc 2e+1 the other way.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::driver::TwoStageProblem;
use crate::error::Error;
use crate::flow::max_flow;
use crate::model::{
    Cut, CutOrigin, LinearProgram, MilpModel, ScenarioSet, Sense, Separator, SparseRow, VarMeta,
};

/// Creep capacity added to every usable arc before a max-flow call, so that
/// min cuts stay informative on degenerate all-zero regions.
pub const EPS_CREEP: f64 = 1e-6;

/// Violation threshold of the connectivity separator.
pub const EPS_CONN_VIOL: f64 = 1e-4;

/// Per-stage data: which connection types and edges may be used, what an
/// installation costs, and which vertex groups must be connected.
#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    /// Usable connection types, length = type count.
    pub usable_types: Vec<bool>,
    /// Usable edges, length = edge count.
    pub usable_edges: Vec<bool>,
    /// Installation costs, costs[m][e] >= 0 over all types and edges.
    pub costs: Vec<Vec<f64>>,
    /// Terminal groups, each sorted ascending and duplicate-free; the first
    /// entry of a group acts as its root.
    pub groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SsfpInstance {
    pub num_vertices: usize,
    /// Undirected edges (u, v) with u < v, duplicate-free.
    pub edges: Vec<(usize, usize)>,
    pub num_types: usize,
    pub first_stage: StageData,
    /// Payload: one stage description per scenario.
    pub scenarios: ScenarioSet<StageData>,
}

impl SsfpInstance {
    pub fn new(
        num_vertices: usize,
        edges: Vec<(usize, usize)>,
        num_types: usize,
        first_stage: StageData,
        scenarios: ScenarioSet<StageData>,
    ) -> Result<Self, Error> {
        if num_vertices == 0 {
            return Err(Error::argument("instance needs at least one vertex"));
        }
        if num_types == 0 {
            return Err(Error::argument("instance needs at least one connection type"));
        }
        let mut seen = HashSet::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= v || v >= num_vertices {
                return Err(Error::argument(format!("edge {i} must satisfy u < v < |V|")));
            }
            if !seen.insert((u, v)) {
                return Err(Error::argument(format!("duplicate edge ({u}, {v})")));
            }
        }
        let inst = SsfpInstance { num_vertices, edges, num_types, first_stage, scenarios };
        inst.check_stage(&inst.first_stage, "first stage")?;
        for (s, st) in inst.scenarios.payloads().iter().enumerate() {
            inst.check_stage(st, &format!("scenario {s}"))?;
        }
        Ok(inst)
    }

    fn check_stage(&self, st: &StageData, what: &str) -> Result<(), Error> {
        if st.usable_types.len() != self.num_types {
            return Err(Error::argument(format!("{what}: usable type flags have wrong length")));
        }
        if st.usable_edges.len() != self.edges.len() {
            return Err(Error::argument(format!("{what}: usable edge flags have wrong length")));
        }
        if st.costs.len() != self.num_types
            || st.costs.iter().any(|row| row.len() != self.edges.len())
        {
            return Err(Error::argument(format!("{what}: cost table has wrong shape")));
        }
        if st.costs.iter().flatten().any(|&c| !(c >= 0.0)) {
            return Err(Error::argument(format!("{what}: costs must be non-negative")));
        }
        if !st.groups.is_empty() && !st.usable_types.iter().any(|&u| u) {
            return Err(Error::argument(format!("{what}: groups present but no usable type")));
        }
        for (k, group) in st.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::argument(format!("{what}: group {k} is empty")));
            }
            if group.iter().any(|&t| t >= self.num_vertices) {
                return Err(Error::argument(format!("{what}: group {k} has an out-of-range vertex")));
            }
            if group.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::argument(format!("{what}: group {k} must be sorted and duplicate-free")));
            }
        }
        Ok(())
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_arcs(&self) -> usize {
        2 * self.edges.len()
    }

    /// (tail, head) of a directed arc.
    pub fn arc_ends(&self, a: usize) -> (usize, usize) {
        let (u, v) = self.edges[a / 2];
        if a % 2 == 0 { (u, v) } else { (v, u) }
    }
}

/// Variable layout of a model built over a stage sequence. Block 0 is the
/// first stage; block 1 + s is the s-th selected scenario. Block sizes vary
/// with the group count of each stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsfpLayout {
    pub num_edges: usize,
    pub num_types: usize,
    /// Offset of each block plus the total variable count as a sentinel.
    offsets: Vec<usize>,
    group_counts: Vec<usize>,
}

impl SsfpLayout {
    pub fn new(num_edges: usize, num_types: usize, group_counts: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(group_counts.len() + 1);
        let mut off = 0;
        for &k in &group_counts {
            offsets.push(off);
            off += Self::block_size(num_edges, num_types, k);
        }
        offsets.push(off);
        SsfpLayout { num_edges, num_types, offsets, group_counts }
    }

    fn block_size(num_edges: usize, num_types: usize, k: usize) -> usize {
        let a = 2 * num_edges;
        num_types * num_edges + num_types * a + k * num_types * a + k * (k + 1) / 2
    }

    pub fn num_vars(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_blocks(&self) -> usize {
        self.group_counts.len()
    }

    pub fn block_offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    pub fn groups_in(&self, b: usize) -> usize {
        self.group_counts[b]
    }

    pub fn x_var(&self, b: usize, m: usize, e: usize) -> usize {
        self.offsets[b] + m * self.num_edges + e
    }

    pub fn y_var(&self, b: usize, m: usize, a: usize) -> usize {
        self.offsets[b] + self.num_types * self.num_edges + m * 2 * self.num_edges + a
    }

    pub fn yk_var(&self, b: usize, k: usize, m: usize, a: usize) -> usize {
        let arcs = 2 * self.num_edges;
        self.offsets[b]
            + self.num_types * self.num_edges
            + self.num_types * arcs
            + (k * self.num_types + m) * arcs
            + a
    }

    /// z variable for the pair (k, l) with l >= k, triangular packing.
    pub fn z_var(&self, b: usize, k: usize, l: usize) -> usize {
        debug_assert!(k <= l && l < self.group_counts[b]);
        let kb = self.group_counts[b];
        let arcs = 2 * self.num_edges;
        self.offsets[b]
            + self.num_types * self.num_edges
            + self.num_types * arcs
            + kb * self.num_types * arcs
            + k * (2 * kb - k + 1) / 2
            + (l - k)
    }

    pub fn block_of(&self, var: usize) -> usize {
        debug_assert!(var < self.num_vars());
        match self.offsets.binary_search(&var) {
            Ok(b) if b < self.group_counts.len() => b,
            Ok(b) => b - 1,
            Err(b) => b - 1,
        }
    }
}

fn stage_refs<'a>(
    inst: &'a SsfpInstance,
    scenario_indices: &[usize],
) -> Result<Vec<&'a StageData>, Error> {
    let mut stages = vec![&inst.first_stage];
    for &s in scenario_indices {
        if s >= inst.scenarios.len() {
            return Err(Error::argument(format!("scenario index {s} out of range")));
        }
        stages.push(inst.scenarios.payload(s));
    }
    Ok(stages)
}

/// Layout of the model built over the given scenario subset.
pub fn layout_for(inst: &SsfpInstance, scenario_indices: &[usize]) -> Result<SsfpLayout, Error> {
    let stages = stage_refs(inst, scenario_indices)?;
    let counts = stages.iter().map(|st| st.groups.len()).collect();
    Ok(SsfpLayout::new(inst.num_edges(), inst.num_types, counts))
}

/// Per-vertex usable in-arcs and out-arcs of a stage.
fn stage_arcs(inst: &SsfpInstance, st: &StageData) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut arcs_in = vec![Vec::new(); inst.num_vertices];
    let mut arcs_out = vec![Vec::new(); inst.num_vertices];
    for (e, &(u, v)) in inst.edges.iter().enumerate() {
        if !st.usable_edges[e] {
            continue;
        }
        arcs_out[u].push(2 * e);
        arcs_in[v].push(2 * e);
        arcs_out[v].push(2 * e + 1);
        arcs_in[u].push(2 * e + 1);
    }
    (arcs_in, arcs_out)
}

/// Shared part of both model builders: variables, bounds, objective and all
/// static rows. `extra_vars` reserves trailing variables for the caller.
fn build_static(
    inst: &SsfpInstance,
    scenario_indices: &[usize],
    probabilities: &[f64],
    extra_vars: usize,
) -> Result<(LinearProgram, Vec<VarMeta>, SsfpLayout), Error> {
    if scenario_indices.len() != probabilities.len() || scenario_indices.is_empty() {
        return Err(Error::argument("scenario subset and probabilities must match and be nonempty"));
    }
    let stages = stage_refs(inst, scenario_indices)?;
    let layout = layout_for(inst, scenario_indices)?;
    let ne = inst.num_edges();
    let na = inst.num_arcs();
    let nt = inst.num_types;
    let num_vars = layout.num_vars() + extra_vars;

    let mut lp = LinearProgram::new(num_vars);
    lp.upper = vec![1.0; num_vars];
    let mut meta = Vec::with_capacity(layout.num_vars());
    for (b, st) in stages.iter().enumerate() {
        let tag = if b == 0 { 0 } else { scenario_indices[b - 1] + 1 };
        let stage = if b == 0 { 0 } else { 1 };
        let kb = st.groups.len();
        for m in 0..nt {
            for e in 0..ne {
                meta.push(VarMeta::new(stage, format!("x{tag}_{m}_{e}")));
            }
        }
        for m in 0..nt {
            for a in 0..na {
                meta.push(VarMeta::new(stage, format!("ya{tag}_{m}_{a}")));
            }
        }
        for k in 0..kb {
            for m in 0..nt {
                for a in 0..na {
                    meta.push(VarMeta::new(stage, format!("yk{tag}_{k}_{m}_{a}")));
                }
            }
        }
        for k in 0..kb {
            for l in k..kb {
                meta.push(VarMeta::new(stage, format!("z{tag}_{k}_{l}")));
            }
        }
    }

    // Objective: first-stage installations pay their own cost and earn back
    // the recourse price of every scenario that inherits them; second-stage
    // installations pay the probability-weighted scenario cost.
    for m in 0..nt {
        for e in 0..ne {
            let mut c0 = inst.first_stage.costs[m][e];
            for (local, &orig) in scenario_indices.iter().enumerate() {
                let cs = inst.scenarios.payload(orig).costs[m][e];
                lp.objective[layout.x_var(1 + local, m, e)] = probabilities[local] * cs;
                c0 -= probabilities[local] * cs;
            }
            lp.objective[layout.x_var(0, m, e)] = c0;
        }
    }

    for (b, st) in stages.iter().enumerate() {
        let kb = st.groups.len();
        let roots: Vec<usize> = st.groups.iter().map(|g| g[0]).collect();
        let (arcs_in, arcs_out) = stage_arcs(inst, st);

        // Unusable types or edges: no flow may use them in this stage.
        for m in 0..nt {
            for e in 0..ne {
                if !st.usable_types[m] || !st.usable_edges[e] {
                    for a in [2 * e, 2 * e + 1] {
                        lp.upper[layout.y_var(b, m, a)] = 0.0;
                        for k in 0..kb {
                            lp.upper[layout.yk_var(b, k, m, a)] = 0.0;
                        }
                    }
                }
            }
        }
        // An arborescence never enters a terminal of an earlier group.
        for k in 1..kb {
            for g in &st.groups[..k] {
                for &t in g {
                    for &a in &arcs_in[t] {
                        for m in 0..nt {
                            lp.upper[layout.yk_var(b, k, m, a)] = 0.0;
                        }
                    }
                }
            }
        }

        let usable_arcs = |m: usize| -> bool { st.usable_types[m] };

        // Every used arc belongs to exactly one arborescence.
        if kb > 0 {
            for m in 0..nt {
                if !usable_arcs(m) {
                    continue;
                }
                for e in 0..ne {
                    if !st.usable_edges[e] {
                        continue;
                    }
                    for a in [2 * e, 2 * e + 1] {
                        let mut entries: Vec<(usize, f64)> =
                            (0..kb).map(|k| (layout.yk_var(b, k, m, a), 1.0)).collect();
                        entries.push((layout.y_var(b, m, a), -1.0));
                        lp.add_row(SparseRow::new(entries), Sense::Le, 0.0);
                    }
                }
            }
        }
        // Flow uses an edge in one direction only, and only when installed.
        for m in 0..nt {
            if !usable_arcs(m) {
                continue;
            }
            for e in 0..ne {
                if !st.usable_edges[e] {
                    continue;
                }
                lp.add_row(
                    SparseRow::new(vec![
                        (layout.y_var(b, m, 2 * e), 1.0),
                        (layout.y_var(b, m, 2 * e + 1), 1.0),
                        (layout.x_var(b, m, e), -1.0),
                    ]),
                    Sense::Le,
                    0.0,
                );
            }
        }
        // Each group is assigned to exactly one root, and a root only serves
        // later groups while it serves its own.
        for k in 0..kb {
            let entries: Vec<(usize, f64)> =
                (0..=k).map(|l| (layout.z_var(b, l, k), 1.0)).collect();
            lp.add_row(SparseRow::new(entries), Sense::Eq, 1.0);
        }
        for k in 1..kb {
            for l in k + 1..kb {
                lp.add_row(
                    SparseRow::new(vec![
                        (layout.z_var(b, k, k), 1.0),
                        (layout.z_var(b, k, l), -1.0),
                    ]),
                    Sense::Ge,
                    0.0,
                );
            }
        }
        // Each vertex receives flow through at most one connection.
        for v in 0..inst.num_vertices {
            let mut entries = Vec::new();
            for m in 0..nt {
                if usable_arcs(m) {
                    for &a in &arcs_in[v] {
                        entries.push((layout.y_var(b, m, a), 1.0));
                    }
                }
            }
            if !entries.is_empty() {
                lp.add_row(SparseRow::new(entries), Sense::Le, 1.0);
            }
        }
        // Flow balance: a Steiner vertex's in-degree never exceeds its
        // out-degree, aggregated and per arborescence.
        if kb > 0 {
            let mut terminal = vec![false; inst.num_vertices];
            for g in &st.groups {
                for &t in g {
                    terminal[t] = true;
                }
            }
            for v in 0..inst.num_vertices {
                if terminal[v] {
                    continue;
                }
                let mut entries = Vec::new();
                for m in 0..nt {
                    if usable_arcs(m) {
                        for &a in &arcs_in[v] {
                            entries.push((layout.y_var(b, m, a), 1.0));
                        }
                        for &a in &arcs_out[v] {
                            entries.push((layout.y_var(b, m, a), -1.0));
                        }
                    }
                }
                if !entries.is_empty() {
                    lp.add_row(SparseRow::new(entries), Sense::Le, 0.0);
                }
            }
            for k in 0..kb {
                let mut exempt = vec![false; inst.num_vertices];
                for g in &st.groups[k..] {
                    for &t in g {
                        exempt[t] = true;
                    }
                }
                exempt[roots[k]] = false;
                for v in 0..inst.num_vertices {
                    if exempt[v] {
                        continue;
                    }
                    let mut entries = Vec::new();
                    for m in 0..nt {
                        if usable_arcs(m) {
                            for &a in &arcs_in[v] {
                                entries.push((layout.yk_var(b, k, m, a), 1.0));
                            }
                            for &a in &arcs_out[v] {
                                entries.push((layout.yk_var(b, k, m, a), -1.0));
                            }
                        }
                    }
                    if !entries.is_empty() {
                        lp.add_row(SparseRow::new(entries), Sense::Le, 0.0);
                    }
                }
            }
        }
        // An arborescence may only enter a later root when assigned to it.
        for k in 0..kb {
            for l in k + 1..kb {
                for m in 0..nt {
                    if !usable_arcs(m) {
                        continue;
                    }
                    let mut entries: Vec<(usize, f64)> = arcs_in[roots[l]]
                        .iter()
                        .map(|&a| (layout.yk_var(b, k, m, a), 1.0))
                        .collect();
                    if entries.is_empty() {
                        continue;
                    }
                    entries.push((layout.z_var(b, k, l), -1.0));
                    lp.add_row(SparseRow::new(entries), Sense::Le, 0.0);
                }
            }
        }
    }

    // A scenario inherits every first-stage installation.
    for b in 1..stages.len() {
        for m in 0..nt {
            for e in 0..ne {
                lp.add_row(
                    SparseRow::new(vec![
                        (layout.x_var(0, m, e), 1.0),
                        (layout.x_var(b, m, e), -1.0),
                    ]),
                    Sense::Le,
                    0.0,
                );
            }
        }
    }

    Ok((lp, meta, layout))
}

/// Cut-based formulation over a scenario subset: all static rows plus lazy
/// connectivity separation per stage.
pub fn build_ssfp_cut_model_for(
    inst: &SsfpInstance,
    scenario_indices: &[usize],
    probabilities: &[f64],
) -> Result<MilpModel, Error> {
    let (lp, meta, layout) = build_static(inst, scenario_indices, probabilities, 0)?;
    let num_vars = lp.num_vars;
    let mut model = MilpModel::new(lp, vec![true; num_vars], meta);
    let stages = stage_refs(inst, scenario_indices)?;
    for (b, st) in stages.iter().enumerate() {
        if st.groups.is_empty() {
            continue;
        }
        model.add_separator(Arc::new(ConnectivitySeparator {
            layout: layout.clone(),
            block: b,
            scenario: if b == 0 { 0 } else { scenario_indices[b - 1] + 1 },
            num_vertices: inst.num_vertices,
            edges: inst.edges.clone(),
            groups: st.groups.clone(),
            usable_types: st.usable_types.clone(),
            usable_edges: st.usable_edges.clone(),
        }));
    }
    Ok(model)
}

/// Direct cut-based formulation over the full scenario set.
pub fn build_ssfp_cut_model(inst: &SsfpInstance) -> Result<MilpModel, Error> {
    let all: Vec<usize> = (0..inst.scenarios.len()).collect();
    build_ssfp_cut_model_for(inst, &all, inst.scenarios.probabilities())
}

/// Connectivity separation on one stage block: for each group pair (k, l)
/// with l >= k and each terminal of group l, a max root-terminal flow over
/// the arborescence-k support (plus creep) below the z value yields the
/// min-cut inequality; the cut computed from the sink side is added when it
/// differs. Cuts repeated within a round are skipped.
pub struct ConnectivitySeparator {
    pub layout: SsfpLayout,
    pub block: usize,
    /// 0 for the first stage, original scenario index plus one otherwise.
    pub scenario: usize,
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub groups: Vec<Vec<usize>>,
    pub usable_types: Vec<bool>,
    pub usable_edges: Vec<bool>,
}

impl Separator for ConnectivitySeparator {
    fn name(&self) -> &'static str {
        "connectivity"
    }

    fn separate(&self, point: &[f64], _point_is_integral: bool) -> Vec<Cut> {
        let n = self.num_vertices;
        let kcnt = self.groups.len();
        let mut cuts = Vec::new();
        let mut seen: HashSet<(usize, usize, Vec<usize>)> = HashSet::new();
        for k in 0..kcnt {
            let root = self.groups[k][0];
            let mut cap = vec![vec![0.0; n]; n];
            for (e, &(u, v)) in self.edges.iter().enumerate() {
                if !self.usable_edges[e] {
                    continue;
                }
                let mut fwd = EPS_CREEP;
                let mut bwd = EPS_CREEP;
                for m in 0..self.usable_types.len() {
                    if self.usable_types[m] {
                        fwd += point[self.layout.yk_var(self.block, k, m, 2 * e)].max(0.0);
                        bwd += point[self.layout.yk_var(self.block, k, m, 2 * e + 1)].max(0.0);
                    }
                }
                cap[u][v] = fwd;
                cap[v][u] = bwd;
            }
            for l in k..kcnt {
                let zhat = point[self.layout.z_var(self.block, k, l)];
                for &t in &self.groups[l] {
                    if t == root {
                        continue;
                    }
                    let Ok(flow) = max_flow(&cap, root, t) else { continue };
                    if flow.value >= zhat - EPS_CONN_VIOL {
                        continue;
                    }
                    let mut sides = vec![flow.source_side.clone()];
                    let back = back_cut_side(&cap, root, t);
                    if back != sides[0] {
                        sides.push(back);
                    }
                    for h in sides {
                        if seen.insert((k, l, h.clone())) {
                            cuts.push(self.connectivity_cut(k, l, &h));
                        }
                    }
                }
            }
        }
        cuts
    }
}

impl ConnectivitySeparator {
    fn connectivity_cut(&self, k: usize, l: usize, h: &[usize]) -> Cut {
        let mut in_h = vec![false; self.num_vertices];
        for &v in h {
            in_h[v] = true;
        }
        let mut entries = Vec::new();
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            if !self.usable_edges[e] {
                continue;
            }
            for (a, tail, head) in [(2 * e, u, v), (2 * e + 1, v, u)] {
                if in_h[tail] && !in_h[head] {
                    for m in 0..self.usable_types.len() {
                        if self.usable_types[m] {
                            entries.push((self.layout.yk_var(self.block, k, m, a), 1.0));
                        }
                    }
                }
            }
        }
        entries.push((self.layout.z_var(self.block, k, l), -1.0));
        Cut::new(SparseRow::new(entries), Sense::Ge, 0.0, CutOrigin::Connectivity, self.scenario)
            .with_aux(h.to_vec())
    }
}

/// Source side of a min cut computed from the sink: run the max flow on the
/// transposed network and complement its source side.
fn back_cut_side(cap: &[Vec<f64>], source: usize, sink: usize) -> Vec<usize> {
    let n = cap.len();
    let mut transposed = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            transposed[v][u] = cap[u][v];
        }
    }
    match max_flow(&transposed, sink, source) {
        Ok(flow) => {
            let reach: HashSet<usize> = flow.source_side.into_iter().collect();
            (0..n).filter(|v| !reach.contains(v)).collect()
        }
        Err(_) => (0..n).filter(|&v| v != sink).collect(),
    }
}

/// Compact flow-based formulation: the static rows plus unit-flow variables
/// per (group, terminal) commodity with conservation tied to z, linking to
/// the arborescence variables, and no out-flow at the target terminal. Flow
/// integrality makes the y variables integral automatically, so their own
/// integrality is relaxed. No separators are registered.
pub fn build_ssfp_flow_model_for(
    inst: &SsfpInstance,
    scenario_indices: &[usize],
    probabilities: &[f64],
) -> Result<MilpModel, Error> {
    let stages = stage_refs(inst, scenario_indices)?;
    let nt = inst.num_types;
    let na = inst.num_arcs();

    // Commodities per block and group: terminals of the groups at or after k
    // (root excluded), each with the first group requiring it.
    let mut commodities: Vec<Vec<Vec<(usize, usize)>>> = Vec::with_capacity(stages.len());
    let mut flow_var_count = 0usize;
    for st in &stages {
        let kb = st.groups.len();
        let mut per_k = Vec::with_capacity(kb);
        for k in 0..kb {
            let root = st.groups[k][0];
            let mut list: Vec<(usize, usize)> = Vec::new();
            for (l, g) in st.groups.iter().enumerate().skip(k) {
                for &t in g {
                    if t != root && !list.iter().any(|&(seen, _)| seen == t) {
                        list.push((t, l));
                    }
                }
            }
            list.sort_unstable();
            flow_var_count += list.len() * nt * na;
            per_k.push(list);
        }
        commodities.push(per_k);
    }

    let (mut lp, mut meta, layout) =
        build_static(inst, scenario_indices, probabilities, flow_var_count)?;

    // Flow variable bases, after the static blocks.
    let mut base = layout.num_vars();
    let mut f_base: Vec<Vec<usize>> = Vec::with_capacity(stages.len());
    for (b, st) in stages.iter().enumerate() {
        let tag = if b == 0 { 0 } else { scenario_indices[b - 1] + 1 };
        let stage = if b == 0 { 0 } else { 1 };
        let mut bases = Vec::with_capacity(st.groups.len());
        for (k, list) in commodities[b].iter().enumerate() {
            bases.push(base);
            for &(t, _) in list {
                for m in 0..nt {
                    for a in 0..na {
                        meta.push(VarMeta::new(stage, format!("f{tag}_{k}_{t}_{m}_{a}")));
                    }
                }
            }
            base += list.len() * nt * na;
        }
        f_base.push(bases);
    }
    let f_var = |b: usize, k: usize, ti: usize, m: usize, a: usize| -> usize {
        f_base[b][k] + (ti * nt + m) * na + a
    };

    for (b, st) in stages.iter().enumerate() {
        let (arcs_in, arcs_out) = stage_arcs(inst, st);
        for (k, list) in commodities[b].iter().enumerate() {
            let root = st.groups[k][0];
            for (ti, &(t, l)) in list.iter().enumerate() {
                // Unusable types or edges carry no flow; flow never leaves
                // the target terminal.
                for m in 0..nt {
                    for e in 0..inst.num_edges() {
                        if !st.usable_types[m] || !st.usable_edges[e] {
                            lp.upper[f_var(b, k, ti, m, 2 * e)] = 0.0;
                            lp.upper[f_var(b, k, ti, m, 2 * e + 1)] = 0.0;
                        }
                    }
                    for &a in &arcs_out[t] {
                        lp.upper[f_var(b, k, ti, m, a)] = 0.0;
                    }
                }
                // Conservation with the commodity's z demand at both ends.
                for v in 0..inst.num_vertices {
                    let mut entries = Vec::new();
                    for m in 0..nt {
                        if !st.usable_types[m] {
                            continue;
                        }
                        for &a in &arcs_out[v] {
                            entries.push((f_var(b, k, ti, m, a), 1.0));
                        }
                        for &a in &arcs_in[v] {
                            entries.push((f_var(b, k, ti, m, a), -1.0));
                        }
                    }
                    if v == root {
                        entries.push((layout.z_var(b, k, l), -1.0));
                    } else if v == t {
                        entries.push((layout.z_var(b, k, l), 1.0));
                    }
                    if !entries.is_empty() {
                        lp.add_row(SparseRow::new(entries), Sense::Eq, 0.0);
                    }
                }
                // Flow triggers the arborescence variable of its arc.
                for m in 0..nt {
                    if !st.usable_types[m] {
                        continue;
                    }
                    for e in 0..inst.num_edges() {
                        if !st.usable_edges[e] {
                            continue;
                        }
                        for a in [2 * e, 2 * e + 1] {
                            lp.add_row(
                                SparseRow::new(vec![
                                    (f_var(b, k, ti, m, a), 1.0),
                                    (layout.yk_var(b, k, m, a), -1.0),
                                ]),
                                Sense::Le,
                                0.0,
                            );
                        }
                    }
                }
            }
        }
    }

    // x, z and f stay binary; both y families are relaxed.
    let mut integral = vec![true; lp.num_vars];
    for (b, st) in stages.iter().enumerate() {
        let kb = st.groups.len();
        for m in 0..nt {
            for a in 0..na {
                integral[layout.y_var(b, m, a)] = false;
                for k in 0..kb {
                    integral[layout.yk_var(b, k, m, a)] = false;
                }
            }
        }
    }

    Ok(MilpModel::new(lp, integral, meta))
}

/// Direct flow-based formulation over the full scenario set.
pub fn build_ssfp_flow_model(inst: &SsfpInstance) -> Result<MilpModel, Error> {
    let all: Vec<usize> = (0..inst.scenarios.len()).collect();
    build_ssfp_flow_model_for(inst, &all, inst.scenarios.probabilities())
}

/// Weighted scenario distance: cost difference (L2 norm over all type-edge
/// pairs), terminal group dissimilarity (best-match symmetric differences,
/// symmetrized by averaging both directions), and usable type set symmetric
/// difference. Weights must sum to one; one-hot weights are allowed.
pub fn ssfp_distance(inst: &SsfpInstance, i: usize, j: usize, beta: [f64; 3]) -> Result<f64, Error> {
    if beta.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
        return Err(Error::argument("each distance weight must lie in [0, 1]"));
    }
    if (beta.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::argument("distance weights must sum to 1"));
    }
    let a = inst.scenarios.payload(i);
    let b = inst.scenarios.payload(j);

    let mut sq = 0.0;
    for m in 0..inst.num_types {
        for e in 0..inst.num_edges() {
            let d = a.costs[m][e] - b.costs[m][e];
            sq += d * d;
        }
    }
    let l1 = sq.sqrt();

    let l2 = (group_distance(&a.groups, &b.groups) + group_distance(&b.groups, &a.groups)) / 2.0;

    let l3 = (0..inst.num_types)
        .filter(|&m| a.usable_types[m] != b.usable_types[m])
        .count() as f64;

    Ok(beta[0] * l1 + beta[1] * l2 + beta[2] * l3)
}

/// For each group of `from`, the symmetric difference against the most
/// similar group of `to`, summed. Groups compared against an empty list
/// count their full size.
fn group_distance(from: &[Vec<usize>], to: &[Vec<usize>]) -> f64 {
    let mut total = 0usize;
    for g in from {
        let gs: HashSet<usize> = g.iter().copied().collect();
        let best = to
            .iter()
            .map(|h| {
                let hs: HashSet<usize> = h.iter().copied().collect();
                gs.symmetric_difference(&hs).count()
            })
            .min()
            .unwrap_or(g.len());
        total += best;
    }
    total as f64
}

// ---------------------------------------------------------------------------
// SteinLib-subset reader
// ---------------------------------------------------------------------------
//
// Recognized sections: Graph (Nodes, Edges, E lines), Terminals (Terminals,
// T lines), Comment (skipped) and any number of Scenario sections, each with
// a Probability line and Group lines listing one terminal group per line.
// Vertex ids are 1-based in the file and 0-based in memory.

/// Base data of a SteinLib-style file with optional scenario blocks.
#[derive(Debug, Clone)]
pub struct StpInstance {
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub edge_costs: Vec<f64>,
    /// Terminals of the underlying deterministic instance.
    pub terminals: Vec<usize>,
    pub scenarios: Vec<StpScenario>,
}

#[derive(Debug, Clone)]
pub struct StpScenario {
    pub probability: f64,
    pub groups: Vec<Vec<usize>>,
}

pub fn parse_stp(text: &str) -> Result<StpInstance, Error> {
    let mut num_vertices = 0usize;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut edge_costs: Vec<f64> = Vec::new();
    let mut declared_edges: Option<usize> = None;
    let mut terminals: Vec<usize> = Vec::new();
    let mut scenarios: Vec<StpScenario> = Vec::new();
    let mut section: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("33D32945") {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        match section.as_deref() {
            None => match head.to_ascii_uppercase().as_str() {
                "SECTION" => {
                    let name = parts
                        .next()
                        .ok_or_else(|| Error::parse(lineno, "SECTION needs a name"))?
                        .to_ascii_lowercase();
                    if name == "scenario" {
                        scenarios.push(StpScenario { probability: f64::NAN, groups: Vec::new() });
                    }
                    section = Some(name);
                }
                "EOF" => break,
                other => return Err(Error::parse(lineno, format!("unexpected token {other}"))),
            },
            Some(name) => {
                if head.eq_ignore_ascii_case("END") {
                    section = None;
                    continue;
                }
                match (name, head.to_ascii_uppercase().as_str()) {
                    ("comment", _) => {}
                    ("graph", "NODES") => {
                        num_vertices = next_usize(&mut parts, lineno, "node count")?;
                    }
                    ("graph", "EDGES") | ("graph", "ARCS") => {
                        declared_edges = Some(next_usize(&mut parts, lineno, "edge count")?);
                    }
                    ("graph", "E") => {
                        let u = next_vertex(&mut parts, lineno, num_vertices)?;
                        let v = next_vertex(&mut parts, lineno, num_vertices)?;
                        let w: f64 = parts
                            .next()
                            .ok_or_else(|| Error::parse(lineno, "edge needs a cost"))?
                            .parse()
                            .map_err(|_| Error::parse(lineno, "bad edge cost"))?;
                        if u == v {
                            return Err(Error::parse(lineno, "self-loop edge"));
                        }
                        edges.push((u.min(v), u.max(v)));
                        edge_costs.push(w);
                    }
                    ("terminals", "TERMINALS") => {}
                    ("terminals", "T") => {
                        terminals.push(next_vertex(&mut parts, lineno, num_vertices)?);
                    }
                    ("scenario", "PROBABILITY") => {
                        let p: f64 = parts
                            .next()
                            .ok_or_else(|| Error::parse(lineno, "Probability needs a value"))?
                            .parse()
                            .map_err(|_| Error::parse(lineno, "bad probability"))?;
                        scenarios.last_mut().unwrap().probability = p;
                    }
                    ("scenario", "GROUP") => {
                        let mut group = Vec::new();
                        for tok in parts.by_ref() {
                            let id: usize =
                                tok.parse().map_err(|_| Error::parse(lineno, "bad vertex id"))?;
                            if id == 0 || id > num_vertices {
                                return Err(Error::parse(lineno, format!("vertex id {id} out of range")));
                            }
                            group.push(id - 1);
                        }
                        if group.is_empty() {
                            return Err(Error::parse(lineno, "empty group"));
                        }
                        group.sort_unstable();
                        group.dedup();
                        scenarios.last_mut().unwrap().groups.push(group);
                    }
                    (sec, tok) => {
                        return Err(Error::parse(lineno, format!("unexpected {tok} in section {sec}")))
                    }
                }
            }
        }
    }

    if num_vertices == 0 {
        return Err(Error::parse(0, "missing Graph section or Nodes line"));
    }
    if let Some(m) = declared_edges {
        if m != edges.len() {
            return Err(Error::parse(0, format!("declared {m} edges, found {}", edges.len())));
        }
    }
    for sc in &scenarios {
        if !sc.probability.is_finite() {
            return Err(Error::parse(0, "scenario without a Probability line"));
        }
        if sc.groups.is_empty() {
            return Err(Error::parse(0, "scenario without Group lines"));
        }
    }
    Ok(StpInstance { num_vertices, edges, edge_costs, terminals, scenarios })
}

fn next_usize<'a>(
    parts: &mut impl Iterator<Item = &'a str>,
    lineno: usize,
    what: &str,
) -> Result<usize, Error> {
    parts
        .next()
        .ok_or_else(|| Error::parse(lineno, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad {what}")))
}

fn next_vertex<'a>(
    parts: &mut impl Iterator<Item = &'a str>,
    lineno: usize,
    num_vertices: usize,
) -> Result<usize, Error> {
    let id = next_usize(parts, lineno, "vertex id")?;
    if id == 0 || id > num_vertices {
        return Err(Error::parse(lineno, format!("vertex id {id} out of range")));
    }
    Ok(id - 1)
}

/// Adapts a parsed file to a two-stage instance: two connection types with
/// the second twice as expensive, scenario costs twice the first-stage
/// costs, the first scenario's groups repeated as the first stage, two extra
/// random groups of five vertices per scenario, and a uniformly drawn usable
/// type set per scenario. Deterministic for a fixed seed.
pub fn adapt_sstp_instance(stp: &StpInstance, seed: u64) -> Result<SsfpInstance, Error> {
    if stp.num_vertices < 5 {
        return Err(Error::argument("adaptation needs at least five vertices"));
    }
    let ne = stp.edges.len();
    if stp.edge_costs.len() != ne {
        return Err(Error::argument("edge cost count mismatch"));
    }
    let base_scenarios: Vec<StpScenario> = if stp.scenarios.is_empty() {
        // No scenario blocks: the terminal list becomes the single scenario.
        if stp.terminals.is_empty() {
            return Err(Error::argument("no scenarios and no terminals to adapt"));
        }
        let mut group = stp.terminals.clone();
        group.sort_unstable();
        group.dedup();
        vec![StpScenario { probability: 1.0, groups: vec![group] }]
    } else {
        stp.scenarios.clone()
    };

    let costs0: Vec<Vec<f64>> = vec![
        stp.edge_costs.clone(),
        stp.edge_costs.iter().map(|&c| 2.0 * c).collect(),
    ];
    let costs_s: Vec<Vec<f64>> = costs0.iter().map(|row| row.iter().map(|&c| 2.0 * c).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probabilities = Vec::with_capacity(base_scenarios.len());
    let mut payload = Vec::with_capacity(base_scenarios.len());
    let mut first_groups: Option<Vec<Vec<usize>>> = None;
    for sc in &base_scenarios {
        let usable_types = match rng.gen_range(0..3u8) {
            0 => vec![true, false],
            1 => vec![false, true],
            _ => vec![true, true],
        };
        let mut groups = sc.groups.clone();
        for _ in 0..2 {
            let mut g: Vec<usize> =
                rand::seq::index::sample(&mut rng, stp.num_vertices, 5).into_vec();
            g.sort_unstable();
            groups.push(g);
        }
        if first_groups.is_none() {
            first_groups = Some(groups.clone());
        }
        probabilities.push(sc.probability);
        payload.push(StageData {
            usable_types,
            usable_edges: vec![true; ne],
            costs: costs_s.clone(),
            groups,
        });
    }

    let first_stage = StageData {
        usable_types: vec![true, true],
        usable_edges: vec![true; ne],
        costs: costs0,
        groups: first_groups.unwrap(),
    };
    let scenarios = ScenarioSet::new(probabilities, payload)?;
    SsfpInstance::new(stp.num_vertices, stp.edges.clone(), 2, first_stage, scenarios)
}

// ---------------------------------------------------------------------------
// Self-contained instance serialization
// ---------------------------------------------------------------------------
//
// Sections: Instance (Vertices, Types), Edges (E u v, 1-based), then one
// Stage section per stage in order (first stage first, scenarios after).
// Scenario stages carry a Probability line; the first stage must not.

pub fn dump_ssfp_instance(inst: &SsfpInstance) -> String {
    let mut out = String::new();
    out.push_str("SECTION Instance\n");
    out.push_str(&format!("Vertices {}\n", inst.num_vertices));
    out.push_str(&format!("Types {}\n", inst.num_types));
    out.push_str("END\n\nSECTION Edges\n");
    for &(u, v) in &inst.edges {
        out.push_str(&format!("E {} {}\n", u + 1, v + 1));
    }
    out.push_str("END\n");
    let dump_stage = |out: &mut String, st: &StageData, p: Option<f64>| {
        out.push_str("\nSECTION Stage\n");
        if let Some(p) = p {
            out.push_str(&format!("Probability {p}\n"));
        }
        out.push_str("UsableTypes");
        for (m, &u) in st.usable_types.iter().enumerate() {
            if u {
                out.push_str(&format!(" {}", m + 1));
            }
        }
        out.push('\n');
        out.push_str("UsableEdges");
        for (e, &u) in st.usable_edges.iter().enumerate() {
            if u {
                out.push_str(&format!(" {}", e + 1));
            }
        }
        out.push('\n');
        for (m, row) in st.costs.iter().enumerate() {
            out.push_str(&format!("Cost {}", m + 1));
            for &c in row {
                out.push_str(&format!(" {c}"));
            }
            out.push('\n');
        }
        for g in &st.groups {
            out.push_str("Group");
            for &t in g {
                out.push_str(&format!(" {}", t + 1));
            }
            out.push('\n');
        }
        out.push_str("END\n");
    };
    dump_stage(&mut out, &inst.first_stage, None);
    for (s, st) in inst.scenarios.payloads().iter().enumerate() {
        dump_stage(&mut out, st, Some(inst.scenarios.probabilities()[s]));
    }
    out.push_str("\nEOF\n");
    out
}

pub fn parse_ssfp_instance(text: &str) -> Result<SsfpInstance, Error> {
    let mut num_vertices = 0usize;
    let mut num_types = 0usize;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    // (probability, stage) in file order; the first stage has no probability.
    let mut stages: Vec<(Option<f64>, StageData)> = Vec::new();
    let mut section: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        match section.as_deref() {
            None => match head.to_ascii_uppercase().as_str() {
                "SECTION" => {
                    let name = parts
                        .next()
                        .ok_or_else(|| Error::parse(lineno, "SECTION needs a name"))?
                        .to_ascii_lowercase();
                    if name == "stage" {
                        if num_vertices == 0 || num_types == 0 || edges.is_empty() {
                            return Err(Error::parse(lineno, "Stage before Instance and Edges"));
                        }
                        stages.push((
                            None,
                            StageData {
                                usable_types: vec![false; num_types],
                                usable_edges: vec![false; edges.len()],
                                costs: vec![vec![0.0; edges.len()]; num_types],
                                groups: Vec::new(),
                            },
                        ));
                    }
                    section = Some(name);
                }
                "EOF" => break,
                other => return Err(Error::parse(lineno, format!("unexpected token {other}"))),
            },
            Some(name) => {
                if head.eq_ignore_ascii_case("END") {
                    section = None;
                    continue;
                }
                match (name, head.to_ascii_uppercase().as_str()) {
                    ("instance", "VERTICES") => {
                        num_vertices = next_usize(&mut parts, lineno, "vertex count")?;
                    }
                    ("instance", "TYPES") => {
                        num_types = next_usize(&mut parts, lineno, "type count")?;
                    }
                    ("edges", "E") => {
                        let u = next_vertex(&mut parts, lineno, num_vertices)?;
                        let v = next_vertex(&mut parts, lineno, num_vertices)?;
                        if u == v {
                            return Err(Error::parse(lineno, "self-loop edge"));
                        }
                        edges.push((u.min(v), u.max(v)));
                    }
                    ("stage", "PROBABILITY") => {
                        let p: f64 = parts
                            .next()
                            .ok_or_else(|| Error::parse(lineno, "Probability needs a value"))?
                            .parse()
                            .map_err(|_| Error::parse(lineno, "bad probability"))?;
                        stages.last_mut().unwrap().0 = Some(p);
                    }
                    ("stage", "USABLETYPES") => {
                        let st = &mut stages.last_mut().unwrap().1;
                        for tok in parts.by_ref() {
                            let m: usize =
                                tok.parse().map_err(|_| Error::parse(lineno, "bad type id"))?;
                            if m == 0 || m > num_types {
                                return Err(Error::parse(lineno, format!("type id {m} out of range")));
                            }
                            st.usable_types[m - 1] = true;
                        }
                    }
                    ("stage", "USABLEEDGES") => {
                        let st = &mut stages.last_mut().unwrap().1;
                        for tok in parts.by_ref() {
                            let e: usize =
                                tok.parse().map_err(|_| Error::parse(lineno, "bad edge id"))?;
                            if e == 0 || e > edges.len() {
                                return Err(Error::parse(lineno, format!("edge id {e} out of range")));
                            }
                            st.usable_edges[e - 1] = true;
                        }
                    }
                    ("stage", "COST") => {
                        let m = next_usize(&mut parts, lineno, "type id")?;
                        if m == 0 || m > num_types {
                            return Err(Error::parse(lineno, format!("type id {m} out of range")));
                        }
                        let st = &mut stages.last_mut().unwrap().1;
                        for (e, tok) in parts.by_ref().enumerate() {
                            if e >= edges.len() {
                                return Err(Error::parse(lineno, "too many cost values"));
                            }
                            st.costs[m - 1][e] =
                                tok.parse().map_err(|_| Error::parse(lineno, "bad cost"))?;
                        }
                    }
                    ("stage", "GROUP") => {
                        let mut group = Vec::new();
                        for tok in parts.by_ref() {
                            group.push(next_vertex(&mut std::iter::once(tok), lineno, num_vertices)?);
                        }
                        if group.is_empty() {
                            return Err(Error::parse(lineno, "empty group"));
                        }
                        group.sort_unstable();
                        group.dedup();
                        stages.last_mut().unwrap().1.groups.push(group);
                    }
                    (sec, tok) => {
                        return Err(Error::parse(lineno, format!("unexpected {tok} in section {sec}")))
                    }
                }
            }
        }
    }

    if stages.is_empty() {
        return Err(Error::parse(0, "file has no Stage sections"));
    }
    let (first_p, first_stage) = stages.remove(0);
    if first_p.is_some() {
        return Err(Error::parse(0, "the first Stage section must not carry a probability"));
    }
    if stages.is_empty() {
        return Err(Error::parse(0, "file needs at least one scenario Stage section"));
    }
    let mut probabilities = Vec::with_capacity(stages.len());
    let mut payload = Vec::with_capacity(stages.len());
    for (p, st) in stages {
        probabilities
            .push(p.ok_or_else(|| Error::parse(0, "scenario Stage section without a probability"))?);
        payload.push(st);
    }
    let scenarios = ScenarioSet::new(probabilities, payload)?;
    SsfpInstance::new(num_vertices, edges, num_types, first_stage, scenarios)
}

/// [`TwoStageProblem`] wrapper for a Steiner forest packing instance with
/// fixed distance weights.
#[derive(Debug, Clone)]
pub struct SsfpProblem {
    pub instance: SsfpInstance,
    beta: [f64; 3],
}

impl SsfpProblem {
    pub fn new(instance: SsfpInstance, beta: [f64; 3]) -> Result<Self, Error> {
        if instance.scenarios.len() > 1 {
            // Validate the weights once, against a real pair.
            ssfp_distance(&instance, 0, 1, beta)?;
        } else if beta.iter().any(|&b| !(0.0..=1.0).contains(&b))
            || (beta.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::argument("distance weights must lie in [0, 1] and sum to 1"));
        }
        Ok(SsfpProblem { instance, beta })
    }

    pub fn beta(&self) -> [f64; 3] {
        self.beta
    }
}

impl TwoStageProblem for SsfpProblem {
    fn num_scenarios(&self) -> usize {
        self.instance.scenarios.len()
    }

    fn probabilities(&self) -> &[f64] {
        self.instance.scenarios.probabilities()
    }

    fn build_model(&self, scenarios: &[usize], probabilities: &[f64]) -> Result<MilpModel, Error> {
        build_ssfp_cut_model_for(&self.instance, scenarios, probabilities)
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        ssfp_distance(&self.instance, i, j, self.beta).unwrap_or(f64::INFINITY)
    }

    fn transfer_cut(&self, cut: &Cut, selected: &[usize]) -> Result<Cut, Error> {
        if cut.scenario == 0 {
            return Ok(cut.clone()); // first-stage blocks line up exactly
        }
        let all: Vec<usize> = (0..self.num_scenarios()).collect();
        let full = layout_for(&self.instance, &all)?;
        let reduced = layout_for(&self.instance, selected)?;
        let orig = cut.scenario - 1;
        let local = selected
            .iter()
            .position(|&s| s == orig)
            .ok_or_else(|| Error::structural("cut references a scenario outside the reduction"))?;
        let from = reduced.block_offset(1 + local);
        let to = full.block_offset(1 + orig);
        let end = reduced.block_offset(2 + local);
        let mut entries = Vec::with_capacity(cut.row.entries().len());
        for &(j, c) in cut.row.entries() {
            if j < from || j >= end {
                return Err(Error::structural("second-stage cut touches a foreign block"));
            }
            entries.push((j - from + to, c));
        }
        let mut out = Cut::new(SparseRow::new(entries), cut.sense, cut.rhs, cut.origin, cut.scenario);
        out.aux = cut.aux.clone();
        Ok(out)
    }

    fn num_first_stage_vars(&self) -> usize {
        // The installation prefix of the first-stage block.
        self.instance.num_types * self.instance.num_edges()
    }
}
