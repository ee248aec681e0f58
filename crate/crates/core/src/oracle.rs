//! Reference implementations used to cross-check the solvers. Everything in
//! here trades speed for obviousness: exhaustive enumeration over tiny
//! instances, no pruning beyond the strictly necessary.

use crate::error::Error;
use crate::model::{LinearProgram, Sense, EPS_FEAS};

/// Minimizes an LP by enumerating candidate vertices: every choice of k rows
/// treated as equalities, k variables solved from them, and the remaining
/// variables pinned to one of their bounds. Requires all variable bounds
/// finite (the feasible set is then a polytope, so an optimum sits on a
/// vertex and infeasibility means no candidate passes). Returns None when
/// infeasible. Exponential; keep n and the row count at 8 or below.
pub fn lp_minimum_by_enumeration(lp: &LinearProgram) -> Result<Option<(f64, Vec<f64>)>, Error> {
    lp.validate()?;
    let n = lp.num_vars;
    let m = lp.num_rows();
    for j in 0..n {
        if !lp.lower[j].is_finite() || !lp.upper[j].is_finite() {
            return Err(Error::argument("enumeration oracle needs finite bounds"));
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let max_k = n.min(m);
    for k in 0..=max_k {
        for rows in subsets(m, k) {
            for vars in subsets(n, k) {
                enumerate_bound_patterns(lp, &rows, &vars, &mut best);
            }
        }
    }
    Ok(best)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn enumerate_bound_patterns(
    lp: &LinearProgram,
    rows: &[usize],
    vars: &[usize],
    best: &mut Option<(f64, Vec<f64>)>,
) {
    let n = lp.num_vars;
    let k = vars.len();
    let fixed: Vec<usize> = (0..n).filter(|j| !vars.contains(j)).collect();
    let patterns = 1usize << fixed.len();
    for mask in 0..patterns {
        let mut x = vec![0.0; n];
        for (bit, &j) in fixed.iter().enumerate() {
            x[j] = if mask >> bit & 1 == 1 { lp.upper[j] } else { lp.lower[j] };
        }
        if k > 0 {
            // Solve the k x k system: rows as equalities in the free vars.
            let mut a = vec![vec![0.0; k + 1]; k];
            for (r, &row_idx) in rows.iter().enumerate() {
                let row = &lp.rows[row_idx];
                let mut rhs = lp.rhs[row_idx];
                for &(j, c) in row.entries() {
                    if let Some(pos) = vars.iter().position(|&v| v == j) {
                        a[r][pos] = c;
                    } else {
                        rhs -= c * x[j];
                    }
                }
                a[r][k] = rhs;
            }
            if !gaussian_solve(&mut a) {
                continue;
            }
            for (pos, &j) in vars.iter().enumerate() {
                x[j] = a[pos][k];
            }
        }
        if !point_feasible(lp, &x) {
            continue;
        }
        let obj: f64 = x.iter().zip(&lp.objective).map(|(&v, &c)| v * c).sum();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            *best = Some((obj, x));
        }
    }
}

/// In-place Gaussian elimination on an augmented k x (k+1) system. Returns
/// false when singular; solution lands in the last column.
fn gaussian_solve(a: &mut [Vec<f64>]) -> bool {
    let k = a.len();
    for col in 0..k {
        let pivot_row = (col..k).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        });
        let Some(p) = pivot_row else { return false };
        if a[p][col].abs() < 1e-10 {
            return false;
        }
        a.swap(col, p);
        for i in 0..k {
            if i != col {
                let f = a[i][col] / a[col][col];
                for j in col..=k {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    for i in 0..k {
        a[i][k] /= a[i][i];
    }
    true
}

/// Checks a point against all bounds and rows of the LP at tolerance 1e-7.
pub fn point_feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    for j in 0..lp.num_vars {
        if x[j] < lp.lower[j] - EPS_FEAS || x[j] > lp.upper[j] + EPS_FEAS {
            return false;
        }
    }
    for (i, row) in lp.rows.iter().enumerate() {
        let lhs: f64 = row.entries().iter().map(|&(j, c)| c * x[j]).sum();
        let ok = match lp.senses[i] {
            Sense::Le => lhs <= lp.rhs[i] + EPS_FEAS,
            Sense::Ge => lhs >= lp.rhs[i] - EPS_FEAS,
            Sense::Eq => (lhs - lp.rhs[i]).abs() <= EPS_FEAS,
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Minimum s-t cut value by enumerating every vertex subset containing the
/// source and excluding the sink. Exponential; keep n at 12 or below.
pub fn min_cut_by_enumeration(cap: &[Vec<f64>], source: usize, sink: usize) -> f64 {
    let n = cap.len();
    let others: Vec<usize> = (0..n).filter(|&v| v != source && v != sink).collect();
    let mut best = f64::INFINITY;
    for mask in 0..(1usize << others.len()) {
        let mut in_cut = vec![false; n];
        in_cut[source] = true;
        for (bit, &v) in others.iter().enumerate() {
            in_cut[v] = mask >> bit & 1 == 1;
        }
        let mut value = 0.0;
        for u in 0..n {
            if !in_cut[u] {
                continue;
            }
            for v in 0..n {
                if !in_cut[v] {
                    value += cap[u][v].max(0.0);
                }
            }
        }
        best = best.min(value);
    }
    best
}

/// A candidate routing plan: depot-rooted trips, each a city sequence.
#[derive(Debug, Clone)]
pub struct TripPlan {
    pub trips: Vec<Vec<usize>>,
    /// Interior arcs (both endpoints non-depot) as (from, to) pairs.
    pub interior: Vec<(usize, usize)>,
    /// Total travel distance including depot arcs.
    pub cost: f64,
}

/// All directed trip collections covering each city exactly once: every
/// permutation of the cities with every way of splitting it into trips.
/// Exponential; keep the city count at 6 or below.
pub fn all_trip_plans(dist: &[Vec<f64>]) -> Vec<TripPlan> {
    let n1 = dist.len();
    let cities: Vec<usize> = (1..n1).collect();
    let mut plans = Vec::new();
    for perm in permutations(&cities) {
        let gaps = perm.len().saturating_sub(1);
        for mask in 0..(1usize << gaps) {
            let mut trips: Vec<Vec<usize>> = vec![vec![perm[0]]];
            for g in 0..gaps {
                if mask >> g & 1 == 1 {
                    trips.push(Vec::new());
                }
                trips.last_mut().unwrap().push(perm[g + 1]);
            }
            let mut interior = Vec::new();
            let mut cost = 0.0;
            for trip in &trips {
                cost += dist[0][trip[0]] + dist[*trip.last().unwrap()][0];
                for w in trip.windows(2) {
                    interior.push((w[0], w[1]));
                    cost += dist[w[0]][w[1]];
                }
            }
            plans.push(TripPlan { trips, interior, cost });
        }
    }
    plans
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (k, &item) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, item);
            out.push(tail);
        }
    }
    out
}

/// Exhaustive optimum of the stochastic routing model: enumerate every
/// first-stage plan, then for each scenario the cheapest recourse plan whose
/// interior arcs the first stage covers and whose trips respect the
/// capacity. Returns (objective, winning first-stage plan).
pub fn scvrp_minimum_by_enumeration(inst: &crate::scvrp::ScvrpInstance) -> Option<(f64, TripPlan)> {
    let plans = all_trip_plans(&inst.dist);
    let probs = inst.scenarios.probabilities();
    let mut best: Option<(f64, TripPlan)> = None;
    for x in &plans {
        let allowed: std::collections::HashSet<(usize, usize)> =
            x.interior.iter().copied().collect();
        let mut total = 0.0;
        let mut feasible = true;
        for (s, &p) in probs.iter().enumerate() {
            let demands = inst.scenarios.payload(s);
            let mut cheapest = f64::INFINITY;
            for y in &plans {
                if !y.interior.iter().all(|arc| allowed.contains(arc)) {
                    continue;
                }
                let fits = y.trips.iter().all(|trip| {
                    trip.iter().map(|&v| demands[v]).sum::<f64>() <= inst.capacity + 1e-9
                });
                if fits {
                    cheapest = cheapest.min(y.cost);
                }
            }
            if !cheapest.is_finite() {
                feasible = false;
                break;
            }
            total += p * cheapest;
        }
        if feasible && best.as_ref().map_or(true, |(b, _)| total < *b) {
            best = Some((total, x.clone()));
        }
    }
    best
}

/// Exhaustive optimum of the stochastic Steiner forest packing model:
/// enumerate every first-stage installation set over (type, edge) pairs,
/// then for each scenario the cheapest superset whose usable part connects
/// all scenario groups. Returns (objective, winning first-stage pairs).
/// Exponential; keep types times edges at 12 or below.
pub fn ssfp_minimum_by_enumeration(
    inst: &crate::ssfp::SsfpInstance,
) -> Option<(f64, Vec<(usize, usize)>)> {
    let np = inst.num_types * inst.num_edges();
    let mut best: Option<(f64, usize)> = None;
    for mask0 in 0u64..(1u64 << np) {
        match ssfp_expected_cost(inst, mask0) {
            Some(total) if best.map_or(true, |(b, _)| total < b) => {
                best = Some((total, mask0 as usize));
            }
            _ => {}
        }
    }
    best.map(|(obj, mask0)| {
        let pairs = (0..np)
            .filter(|&p| mask0 >> p & 1 == 1)
            .map(|p| (p / inst.num_edges(), p % inst.num_edges()))
            .collect();
        (obj, pairs)
    })
}

/// Expected total cost of a given first-stage installation set, or None when
/// it leaves the first stage or some scenario unconnectable. Pairs are
/// encoded as bits m * |E| + e.
pub fn ssfp_expected_cost(inst: &crate::ssfp::SsfpInstance, mask0: u64) -> Option<f64> {
    let np = inst.num_types * inst.num_edges();
    if !ssfp_stage_connected(inst, &inst.first_stage, mask0) {
        return None;
    }
    let mut total = ssfp_pair_cost(inst, &inst.first_stage, mask0);
    let free = (if np == 64 { u64::MAX } else { (1u64 << np) - 1 }) & !mask0;
    for (s, &p) in inst.scenarios.probabilities().iter().enumerate() {
        let st = inst.scenarios.payload(s);
        let mut cheapest = f64::INFINITY;
        // All supersets of the first stage: add any subset of `free`.
        let mut add = free;
        loop {
            if ssfp_stage_connected(inst, st, mask0 | add) {
                cheapest = cheapest.min(ssfp_pair_cost(inst, st, add));
            }
            if add == 0 {
                break;
            }
            add = (add - 1) & free;
        }
        if !cheapest.is_finite() {
            return None;
        }
        total += p * cheapest;
    }
    Some(total)
}

fn ssfp_pair_cost(inst: &crate::ssfp::SsfpInstance, st: &crate::ssfp::StageData, mask: u64) -> f64 {
    let ne = inst.num_edges();
    let mut cost = 0.0;
    for m in 0..inst.num_types {
        for e in 0..ne {
            if mask >> (m * ne + e) & 1 == 1 {
                cost += st.costs[m][e];
            }
        }
    }
    cost
}

/// Whether every group of the stage lies in one component of the graph of
/// installed pairs with a usable type on a usable edge.
fn ssfp_stage_connected(
    inst: &crate::ssfp::SsfpInstance,
    st: &crate::ssfp::StageData,
    mask: u64,
) -> bool {
    let ne = inst.num_edges();
    let mut parent: Vec<usize> = (0..inst.num_vertices).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (e, &(u, v)) in inst.edges.iter().enumerate() {
        if !st.usable_edges[e] {
            continue;
        }
        let installed = (0..inst.num_types)
            .any(|m| st.usable_types[m] && mask >> (m * ne + e) & 1 == 1);
        if installed {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a] = b;
            }
        }
    }
    st.groups.iter().all(|g| {
        let r = find(&mut parent, g[0]);
        g.iter().all(|&t| find(&mut parent, t) == r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparseRow;

    #[test]
    fn enumerates_simple_vertex() {
        // min -x-2y s.t. x+y <= 3, x,y in [0,2]: optimum (1,2) -> -5.
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -2.0];
        lp.upper = vec![2.0, 2.0];
        lp.add_row(SparseRow::new(vec![(0, 1.0), (1, 1.0)]), Sense::Le, 3.0);
        let (obj, x) = lp_minimum_by_enumeration(&lp).unwrap().unwrap();
        assert!((obj + 5.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_box() {
        let mut lp = LinearProgram::new(1);
        lp.upper = vec![1.0];
        lp.add_row(SparseRow::new(vec![(0, 1.0)]), Sense::Ge, 2.0);
        assert!(lp_minimum_by_enumeration(&lp).unwrap().is_none());
    }

    #[test]
    fn min_cut_matches_hand_value() {
        let mut cap = vec![vec![0.0; 4]; 4];
        cap[0][1] = 5.0;
        cap[1][2] = 1.0;
        cap[2][3] = 5.0;
        assert!((min_cut_by_enumeration(&cap, 0, 3) - 1.0).abs() < 1e-12);
    }
}
