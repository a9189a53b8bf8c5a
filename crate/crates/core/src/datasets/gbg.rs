//! Path libraries on graphs with independently valid edges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::seed;

use super::graph::Graph2D;
use super::paths_to_instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbgParams {
    pub num_vertices: usize,
    /// Connection radius; defaults to twice the connectivity threshold.
    pub radius: Option<f64>,
    pub num_regions: usize,
    pub deletion_prob: f64,
    pub bias_range: (f64, f64),
    pub attempt_cap: usize,
}

impl Default for GbgParams {
    fn default() -> Self {
        GbgParams {
            num_vertices: 100,
            radius: None,
            num_regions: 100,
            deletion_prob: 0.5,
            bias_range: (0.1, 0.9),
            attempt_cap: 10_000,
        }
    }
}

/// Distinct start→goal paths found by repeatedly deleting each edge with
/// probability `deletion_prob` and taking the shortest surviving path.
pub fn sample_paths(graph: &Graph2D, params: &GbgParams, seed: u64) -> Result<Vec<Vec<usize>>> {
    if !(0.0..1.0).contains(&params.deletion_prob) {
        return Err(Error::InvalidParams("deletion_prob must lie in [0, 1)".into()));
    }
    let mut rng = seed::stream(seed, "gbg-deletions", 0);
    let mut paths: Vec<Vec<usize>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0;
    while paths.len() < params.num_regions {
        if attempts >= params.attempt_cap {
            return Err(Error::AttemptCapExceeded {
                found: paths.len(),
                wanted: params.num_regions,
                attempts,
            });
        }
        attempts += 1;
        let kept: Vec<bool> = (0..graph.num_edges())
            .map(|_| rng.random::<f64>() >= params.deletion_prob)
            .collect();
        if let Some(path) = graph.shortest_path(|e| kept[e]) {
            let mut key = path.clone();
            key.sort_unstable();
            if seen.insert(key) {
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

/// Regions are the edge sets of [`sample_paths`]; each used edge becomes a
/// test with bias uniform in `bias_range`.
pub fn gen_gbg_paths(graph: &Graph2D, params: &GbgParams, seed: u64) -> Result<ProblemInstance> {
    let paths = sample_paths(graph, params, seed)?;
    let (lo, hi) = params.bias_range;
    if !(0.0 < lo && lo <= hi && hi < 1.0) {
        return Err(Error::InvalidParams(format!("bias range ({lo}, {hi}) must lie in (0, 1)")));
    }
    let mut rng = seed::stream(seed, "gbg-bias", 0);
    let edge_bias: Vec<f64> = (0..graph.num_edges())
        .map(|_| if lo < hi { rng.random_range(lo..hi) } else { lo })
        .collect();
    paths_to_instance(graph, &paths, &edge_bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::graph::gen_rgg;
    use crate::datasets::test_edges;

    #[test]
    fn paths_connect_start_and_goal_and_are_distinct() {
        let g = gen_rgg(100, None, 3).unwrap();
        let p = GbgParams {
            num_regions: 30,
            ..Default::default()
        };
        let inst = gen_gbg_paths(&g, &p, 3).unwrap();
        assert_eq!(inst.num_regions(), 30);
        let edges = test_edges(&inst).unwrap();
        for region in inst.regions() {
            let path: Vec<usize> = region.tests().iter().map(|t| edges[t.index()]).collect();
            // every vertex except start and goal has even degree within the path
            let mut deg = vec![0usize; g.num_vertices()];
            for &e in &path {
                let (u, v) = g.edges()[e];
                deg[u] += 1;
                deg[v] += 1;
            }
            assert_eq!(deg[g.start()], 1);
            assert_eq!(deg[g.goal()], 1);
        }
    }

    #[test]
    fn single_region_is_first_path_found() {
        let g = gen_rgg(60, None, 5).unwrap();
        let p = GbgParams {
            num_regions: 1,
            ..Default::default()
        };
        let paths = sample_paths(&g, &p, 9).unwrap();
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn path_count_limited_by_graph() {
        let g = Graph2D::new(vec![[0.0, 0.0], [1.0, 1.0]], vec![(0, 1)], 0, 1).unwrap();
        let p = GbgParams {
            num_regions: 2,
            attempt_cap: 50,
            ..Default::default()
        };
        assert!(matches!(
            gen_gbg_paths(&g, &p, 1),
            Err(Error::AttemptCapExceeded { found: 1, .. })
        ));
    }
}
