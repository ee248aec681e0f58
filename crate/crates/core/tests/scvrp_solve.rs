//! End-to-end checks of the routing adapter: solver versus exhaustive
//! enumeration, separator soundness, and the pipeline identity.

use tulip_core::bnc::{filter_tight, solve_bnc, solve_root, BncOptions, CutPool};
use tulip_core::driver::{fix_first_stage_and_resolve, tulip_solve, TwoStageProblem};
use tulip_core::model::{cut_slack, ScenarioSet, SolveStatus, EPS_TIGHT};
use tulip_core::oracle::{all_trip_plans, scvrp_minimum_by_enumeration};
use tulip_core::reduce::{fast_forward_select, DistanceMatrix};
use tulip_core::scvrp::{build_scvrp_model, ScvrpInstance, ScvrpProblem};

fn euclid(coords: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let n = coords.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let dx = coords[i].0 - coords[j].0;
                    let dy = coords[i].1 - coords[j].1;
                    (dx * dx + dy * dy).sqrt()
                })
                .collect()
        })
        .collect()
}

fn instance(coords: &[(f64, f64)], demands: Vec<Vec<f64>>, capacity: f64) -> ScvrpInstance {
    let s = demands.len();
    let scenarios = ScenarioSet::new(vec![1.0 / s as f64; s], demands).unwrap();
    ScvrpInstance::new(euclid(coords), capacity, scenarios).unwrap()
}

/// Builds the full model point for a combination of trip plans.
fn combo_point(
    inst: &ScvrpInstance,
    x: &tulip_core::oracle::TripPlan,
    ys: &[&tulip_core::oracle::TripPlan],
) -> Vec<f64> {
    let l = inst.layout();
    let mut point = vec![0.0; l.num_arcs() * (1 + ys.len())];
    let mark = |vars: &mut Vec<f64>, base: usize, plan: &tulip_core::oracle::TripPlan| {
        for trip in &plan.trips {
            vars[base + l.arc(0, trip[0])] = 1.0;
            vars[base + l.arc(*trip.last().unwrap(), 0)] = 1.0;
            for w in trip.windows(2) {
                vars[base + l.arc(w[0], w[1])] = 1.0;
            }
        }
    };
    mark(&mut point, 0, x);
    for (s, y) in ys.iter().enumerate() {
        mark(&mut point, (1 + s) * l.num_arcs(), y);
    }
    point
}

#[test]
fn bnc_matches_enumeration_on_small_instances() {
    let coords = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
    let cases = vec![
        (vec![vec![0.0, 1.0, 1.0, 1.0], vec![0.0, 3.0, 3.0, 3.0]], 4.0),
        (vec![vec![0.0, 2.0, 2.0, 2.0], vec![0.0, 2.0, 5.0, 2.0]], 6.0),
        (vec![vec![0.0, 1.0, 4.0, 1.0], vec![0.0, 4.0, 4.0, 4.0]], 5.0),
    ];
    for (demands, capacity) in cases {
        let inst = instance(&coords, demands, capacity);
        let (oracle_obj, _) = scvrp_minimum_by_enumeration(&inst).unwrap();
        let model = build_scvrp_model(&inst).unwrap();
        let res = solve_bnc(&model, &CutPool::new(), &BncOptions::default()).unwrap();
        assert_eq!(res.report.status, SolveStatus::Optimal);
        assert!(
            (res.report.objective - oracle_obj).abs() < 1e-6,
            "solver {} vs enumeration {}",
            res.report.objective,
            oracle_obj
        );
    }
}

#[test]
fn separators_are_sound_and_quiet_on_feasible_points() {
    let coords = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let inst = instance(&coords, vec![vec![0.0, 2.0, 3.0, 2.0]], 5.0);
    let model = build_scvrp_model(&inst).unwrap();
    let plans = all_trip_plans(&inst.dist);
    let demands = inst.scenarios.payload(0);

    // All (x, y) combinations; feasibility per the enumeration rules.
    let mut feasible_points = Vec::new();
    let mut emitted_cuts = Vec::new();
    for x in &plans {
        let allowed: std::collections::HashSet<(usize, usize)> =
            x.interior.iter().copied().collect();
        for y in &plans {
            let point = combo_point(&inst, x, &[y]);
            let linked = y.interior.iter().all(|arc| allowed.contains(arc));
            let fits = y
                .trips
                .iter()
                .all(|t| t.iter().map(|&v| demands[v]).sum::<f64>() <= inst.capacity + 1e-9);
            let mut cuts = Vec::new();
            for sep in &model.separators {
                cuts.extend(sep.separate(&point, true));
            }
            if linked && fits {
                assert!(
                    cuts.is_empty(),
                    "feasible point received {} cuts from x={:?} y={:?}",
                    cuts.len(),
                    x.trips,
                    y.trips
                );
                feasible_points.push(point);
            } else if linked {
                emitted_cuts.extend(cuts);
            }
        }
    }
    assert!(!feasible_points.is_empty());
    assert!(!emitted_cuts.is_empty());
    for cut in &emitted_cuts {
        for point in &feasible_points {
            assert!(
                cut_slack(cut, point).unwrap() >= -1e-9,
                "cut {:?} violated by a feasible solution",
                cut.aux
            );
        }
    }
}

#[test]
fn identical_scenarios_collapse_to_deterministic() {
    let coords = [(0.0, 0.0), (1.5, 0.5), (0.5, 1.5), (2.0, 2.0)];
    let b = vec![0.0, 2.0, 2.0, 2.0];
    let single = instance(&coords, vec![b.clone()], 4.0);
    let triple = instance(&coords, vec![b.clone(), b.clone(), b], 4.0);
    let one = solve_bnc(&build_scvrp_model(&single).unwrap(), &CutPool::new(), &BncOptions::default()).unwrap();
    let three = solve_bnc(&build_scvrp_model(&triple).unwrap(), &CutPool::new(), &BncOptions::default()).unwrap();
    assert!((one.report.objective - three.report.objective).abs() < 1e-6);
}

fn five_city_problem() -> ScvrpProblem {
    let coords = [(0.0, 0.25), (-1.0, 1.0), (-0.75, 2.0), (0.75, 2.0), (1.0, 1.0)];
    let demands = vec![
        vec![0.0, 2.0, 2.0, 1.0, 2.0],
        vec![0.0, 2.0, 2.0, 7.0, 2.0],
        vec![0.0, 1.0, 3.0, 2.0, 2.0],
        vec![0.0, 3.0, 1.0, 2.0, 1.0],
    ];
    ScvrpProblem { instance: instance(&coords, demands, 10.0) }
}

#[test]
fn pipeline_matches_direct_solve() {
    let problem = five_city_problem();
    let direct = solve_bnc(
        &build_scvrp_model(&problem.instance).unwrap(),
        &CutPool::new(),
        &BncOptions::default(),
    )
    .unwrap();
    let tulip = tulip_solve(&problem, 0.5, None).unwrap();
    assert_eq!(tulip.report.status, SolveStatus::Optimal);
    assert!(
        (tulip.report.objective - direct.report.objective).abs() < 1e-6,
        "pipeline {} vs direct {}",
        tulip.report.objective,
        direct.report.objective
    );
    assert!(tulip.report.tight_ratio >= 0.0 && tulip.report.tight_ratio <= 1.0);

    let (oracle_obj, _) = scvrp_minimum_by_enumeration(&problem.instance).unwrap();
    assert!((direct.report.objective - oracle_obj).abs() < 1e-6);
}

#[test]
fn degenerate_fraction_one_is_direct_solve() {
    let problem = five_city_problem();
    let direct = solve_bnc(
        &build_scvrp_model(&problem.instance).unwrap(),
        &CutPool::new(),
        &BncOptions::default(),
    )
    .unwrap();
    let full = tulip_solve(&problem, 1.0, None).unwrap();
    assert!((full.report.objective - direct.report.objective).abs() < 1e-9);
}

#[test]
fn fixing_any_tour_dominates_optimum() {
    let problem = five_city_problem();
    let l = problem.instance.layout();
    // Single tour 0 -> 1 -> 2 -> 3 -> 4 -> 0 as the fixed first stage.
    let mut x = vec![0.0; l.num_arcs()];
    for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)] {
        x[l.x_var(i, j)] = 1.0;
    }
    let fixed = fix_first_stage_and_resolve(&problem, &x, None).unwrap();
    let optimum = tulip_solve(&problem, 1.0, None).unwrap();
    assert_eq!(fixed.report.status, SolveStatus::Optimal);
    assert!(fixed.report.objective >= optimum.report.objective - 1e-9);

    // Fixing the optimal first stage reproduces the optimum.
    let k = problem.num_first_stage_vars();
    let inc = optimum.incumbent.as_ref().unwrap();
    let refixed = fix_first_stage_and_resolve(&problem, &inc[..k], None).unwrap();
    assert!((refixed.report.objective - optimum.report.objective).abs() < 1e-6);
}

#[test]
fn transferred_cuts_hold_at_the_full_optimum() {
    let problem = five_city_problem();
    let s = problem.num_scenarios();
    let d = DistanceMatrix::from_metric(s, |i, j| problem.distance(i, j)).unwrap();
    let red = fast_forward_select(&d, problem.probabilities(), 2).unwrap();
    let reduced = problem.build_model(&red.selected, &red.new_probabilities).unwrap();
    let root = solve_root(&reduced).unwrap();
    let tight = filter_tight(&root.pool, &root.solution.point, EPS_TIGHT).unwrap();

    let mut transferred = CutPool::new();
    for cut in tight.cuts() {
        transferred.try_insert(problem.transfer_cut(cut, &red.selected).unwrap());
    }
    let all: Vec<usize> = (0..s).collect();
    let full = problem.build_model(&all, problem.probabilities()).unwrap();
    let res = solve_bnc(&full, &transferred, &BncOptions::default()).unwrap();
    let incumbent = res.incumbent.unwrap();
    for cut in transferred.cuts() {
        assert!(
            cut_slack(cut, &incumbent).unwrap() >= -1e-6,
            "transferred cut violated at the optimum"
        );
    }
}
