//! Edmonds-Karp max flow on dense capacity matrices, with both sides of the
//! induced minimum cut. Separation routines need the source-side set for the
//! primary cut and the sink-side set for the optional back cut.

use crate::error::Error;

#[derive(Debug, Clone)]
pub struct MaxFlow {
    pub value: f64,
    /// Vertices reachable from the source in the residual graph.
    pub source_side: Vec<usize>,
    /// Complement of `source_side`.
    pub sink_side: Vec<usize>,
}

/// Computes a maximum flow from `source` to `sink` over a dense capacity
/// matrix (`cap[u][v]` is the capacity of arc u -> v; negative entries are
/// treated as zero).
pub fn max_flow(cap: &[Vec<f64>], source: usize, sink: usize) -> Result<MaxFlow, Error> {
    let n = cap.len();
    if source >= n || sink >= n {
        return Err(Error::argument("max flow endpoint out of range"));
    }
    if source == sink {
        return Err(Error::argument("max flow source equals sink"));
    }
    for (i, row) in cap.iter().enumerate() {
        if row.len() != n {
            return Err(Error::argument(format!("capacity row {i} has wrong length")));
        }
    }

    let mut residual: Vec<Vec<f64>> = cap
        .iter()
        .map(|row| row.iter().map(|&c| c.max(0.0)).collect())
        .collect();
    let mut value = 0.0;
    let mut parent = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();

    loop {
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        parent[source] = source;
        queue.clear();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for v in 0..n {
                if parent[v] == usize::MAX && residual[u][v] > 1e-12 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            break;
        }
        // Bottleneck along the augmenting path.
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let u = parent[v];
            bottleneck = bottleneck.min(residual[u][v]);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let u = parent[v];
            residual[u][v] -= bottleneck;
            residual[v][u] += bottleneck;
            v = u;
        }
        value += bottleneck;
    }

    let mut source_side = Vec::new();
    let mut sink_side = Vec::new();
    for v in 0..n {
        if parent[v] != usize::MAX {
            source_side.push(v);
        } else {
            sink_side.push(v);
        }
    }
    Ok(MaxFlow { value, source_side, sink_side })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let cap = vec![vec![0.0, 3.5], vec![0.0, 0.0]];
        let f = max_flow(&cap, 0, 1).unwrap();
        assert!((f.value - 3.5).abs() < 1e-12);
        assert_eq!(f.source_side, vec![0]);
        assert_eq!(f.sink_side, vec![1]);
    }

    #[test]
    fn parallel_paths() {
        // 0 -> 1 -> 3 with cap 2, 0 -> 2 -> 3 with cap 1.
        let mut cap = vec![vec![0.0; 4]; 4];
        cap[0][1] = 2.0;
        cap[1][3] = 2.0;
        cap[0][2] = 1.0;
        cap[2][3] = 1.0;
        let f = max_flow(&cap, 0, 3).unwrap();
        assert!((f.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bottleneck_in_middle() {
        // 0 -> 1 (cap 5), 1 -> 2 (cap 1), 2 -> 3 (cap 5): min cut is {0,1}.
        let mut cap = vec![vec![0.0; 4]; 4];
        cap[0][1] = 5.0;
        cap[1][2] = 1.0;
        cap[2][3] = 5.0;
        let f = max_flow(&cap, 0, 3).unwrap();
        assert!((f.value - 1.0).abs() < 1e-12);
        assert_eq!(f.source_side, vec![0, 1]);
        assert_eq!(f.sink_side, vec![2, 3]);
    }

    #[test]
    fn disconnected_sink() {
        let cap = vec![vec![0.0; 2]; 2];
        let f = max_flow(&cap, 0, 1).unwrap();
        assert_eq!(f.value, 0.0);
        assert_eq!(f.source_side, vec![0]);
    }

    #[test]
    fn rejects_equal_endpoints() {
        let cap = vec![vec![0.0; 2]; 2];
        assert!(max_flow(&cap, 1, 1).is_err());
    }

    #[test]
    fn undoes_flow_through_cross_arc() {
        // Classic example requiring flow cancellation on the middle arc.
        let mut cap = vec![vec![0.0; 4]; 4];
        cap[0][1] = 1.0;
        cap[0][2] = 1.0;
        cap[1][2] = 1.0;
        cap[1][3] = 1.0;
        cap[2][3] = 1.0;
        let f = max_flow(&cap, 0, 3).unwrap();
        assert!((f.value - 2.0).abs() < 1e-12);
    }
}
