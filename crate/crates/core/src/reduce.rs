//! Fast-forward scenario reduction with probability redistribution.

use crate::error::Error;

/// Pairwise scenario distances.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    d: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(d: Vec<Vec<f64>>) -> Result<DistanceMatrix, Error> {
        let s = d.len();
        for (i, row) in d.iter().enumerate() {
            if row.len() != s {
                return Err(Error::argument(format!("distance row {i} has wrong length")));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::argument(format!("distance ({i},{j}) not a nonnegative finite value")));
                }
            }
            if row[i] != 0.0 {
                return Err(Error::argument(format!("distance ({i},{i}) must be zero")));
            }
        }
        Ok(DistanceMatrix { d })
    }

    /// Builds the matrix from a pairwise metric over `s` scenarios. The
    /// metric is evaluated once per unordered pair and mirrored.
    pub fn from_metric(s: usize, mut metric: impl FnMut(usize, usize) -> f64) -> Result<DistanceMatrix, Error> {
        let mut d = vec![vec![0.0; s]; s];
        for i in 0..s {
            for j in i + 1..s {
                let v = metric(i, j);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        DistanceMatrix::new(d)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }
}

/// Result of a fast-forward reduction.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// Original scenario indices, in ascending order.
    pub selected: Vec<usize>,
    /// Redistributed probability per selected scenario.
    pub new_probabilities: Vec<f64>,
    /// Excluded scenario index -> selected scenario index absorbing it.
    pub assignment: std::collections::BTreeMap<usize, usize>,
}

/// Greedy fast-forward selection: repeatedly add the scenario whose
/// inclusion minimizes the probability-weighted nearest-selected distance of
/// the remainder, then fold each excluded scenario's probability into its
/// nearest selected one. Ties break toward the lowest index.
pub fn fast_forward_select(d: &DistanceMatrix, p: &[f64], target: usize) -> Result<Reduction, Error> {
    let s = d.len();
    if p.len() != s {
        return Err(Error::argument("probability vector length does not match distance matrix"));
    }
    if target == 0 || target > s {
        return Err(Error::argument(format!("target {target} out of range 1..={s}")));
    }

    // cost_to_sel[j] = min over selected i of the working cost c(j,i).
    let mut selected_mask = vec![false; s];
    let mut cost_to_sel = vec![f64::INFINITY; s];
    let mut order = Vec::with_capacity(target);

    for _ in 0..target {
        let mut best: Option<(usize, f64)> = None;
        for u in 0..s {
            if selected_mask[u] {
                continue;
            }
            let mut total = 0.0;
            for j in 0..s {
                if selected_mask[j] || j == u {
                    continue;
                }
                total += p[j] * d.get(j, u).min(cost_to_sel[j]);
            }
            if best.map_or(true, |(_, b)| total < b - 1e-15) {
                best = Some((u, total));
            }
        }
        let (u, _) = best.expect("target <= s guarantees a candidate");
        selected_mask[u] = true;
        order.push(u);
        for j in 0..s {
            cost_to_sel[j] = cost_to_sel[j].min(d.get(j, u));
        }
    }

    let mut selected: Vec<usize> = order;
    selected.sort_unstable();

    let mut new_probabilities: Vec<f64> = selected.iter().map(|&i| p[i]).collect();
    let mut assignment = std::collections::BTreeMap::new();
    for j in 0..s {
        if selected_mask[j] {
            continue;
        }
        let mut nearest = 0usize;
        for (k, &i) in selected.iter().enumerate() {
            if d.get(j, i) < d.get(j, selected[nearest]) - 1e-15 {
                nearest = k;
            }
        }
        new_probabilities[nearest] += p[j];
        assignment.insert(j, selected[nearest]);
    }

    Ok(Reduction { selected, new_probabilities, assignment })
}

/// Transport cost of a selection: probability-weighted distance of every
/// excluded scenario to its nearest selected one.
pub fn transport_cost(d: &DistanceMatrix, p: &[f64], selected: &[usize]) -> f64 {
    let s = d.len();
    let mut total = 0.0;
    for j in 0..s {
        if selected.contains(&j) {
            continue;
        }
        let nearest = selected
            .iter()
            .map(|&i| d.get(j, i))
            .fold(f64::INFINITY, f64::min);
        total += p[j] * nearest;
    }
    total
}

/// Maps a reduction fraction to a scenario count: max(1, round(fraction * s)).
pub fn reduction_fraction_to_target(s: usize, fraction: f64) -> Result<usize, Error> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::argument(format!("fraction {fraction} outside (0, 1]")));
    }
    Ok(((fraction * s as f64).round() as usize).max(1).min(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_scenario() -> (DistanceMatrix, Vec<f64>) {
        let d = DistanceMatrix::new(vec![
            vec![0.0, 1.0, 4.0],
            vec![1.0, 0.0, 2.0],
            vec![4.0, 2.0, 0.0],
        ])
        .unwrap();
        (d, vec![0.5, 0.3, 0.2])
    }

    #[test]
    fn identity_reduction() {
        let (d, p) = three_scenario();
        let r = fast_forward_select(&d, &p, 3).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2]);
        assert_eq!(r.new_probabilities, p);
        assert!(r.assignment.is_empty());
    }

    #[test]
    fn hand_example_target_one() {
        // Inclusion costs: u=0 -> 0.3*1 + 0.2*4 = 1.1, u=1 -> 0.9, u=2 -> 2.6.
        let (d, p) = three_scenario();
        let r = fast_forward_select(&d, &p, 1).unwrap();
        assert_eq!(r.selected, vec![1]);
        assert!((r.new_probabilities[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.assignment.get(&0), Some(&1));
        assert_eq!(r.assignment.get(&2), Some(&1));
    }

    #[test]
    fn hand_example_target_two() {
        // After selecting 1: u=0 -> 0.2*min(4,2) = 0.4, u=2 -> 0.5*min(1,.) = 0.5.
        let (d, p) = three_scenario();
        let r = fast_forward_select(&d, &p, 2).unwrap();
        assert_eq!(r.selected, vec![0, 1]);
        assert_eq!(r.new_probabilities, vec![0.5, 0.5]);
        assert_eq!(r.assignment.get(&2), Some(&1));
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let d = DistanceMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = fast_forward_select(&d, &[0.5, 0.5], 1).unwrap();
        assert_eq!(r.selected, vec![0]);
    }

    #[test]
    fn fraction_mapping() {
        assert_eq!(reduction_fraction_to_target(250, 0.1).unwrap(), 25);
        assert_eq!(reduction_fraction_to_target(5, 0.1).unwrap(), 1);
        assert_eq!(reduction_fraction_to_target(50, 1.0).unwrap(), 50);
        assert!(reduction_fraction_to_target(10, 0.0).is_err());
        assert!(reduction_fraction_to_target(10, 1.5).is_err());
    }

    #[test]
    fn rejects_bad_target() {
        let (d, p) = three_scenario();
        assert!(fast_forward_select(&d, &p, 0).is_err());
        assert!(fast_forward_select(&d, &p, 4).is_err());
    }

    #[test]
    fn rejects_asymmetric_lengths() {
        assert!(DistanceMatrix::new(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(DistanceMatrix::new(vec![vec![1.0]]).is_err()); // nonzero diagonal
    }
}
