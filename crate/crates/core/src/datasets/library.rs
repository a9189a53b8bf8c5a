//! Path libraries trained on sampled worlds: the shortest valid path of each
//! training world is a candidate, and candidates are chosen greedily by how many
//! not-yet-covered training worlds they are valid in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroundTruth, ProblemInstance};
use crate::seed;

use super::graph::Graph2D;
use super::paths_to_instance;
use super::world::{collide, estimate_bias, gen_world, WorldMap, WorldParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryParams {
    pub num_vertices: usize,
    pub radius: Option<f64>,
    pub library_size: usize,
    pub num_train: usize,
    pub num_bias_worlds: usize,
    pub world: WorldParams,
}

impl Default for LibraryParams {
    fn default() -> Self {
        LibraryParams {
            num_vertices: 200,
            radius: None,
            library_size: 100,
            num_train: 1000,
            num_bias_worlds: 1000,
            world: WorldParams::default(),
        }
    }
}

/// Samples world `index` of the stream `label`.
pub fn sample_world(params: &WorldParams, seed: u64, label: &str, index: u64) -> Result<WorldMap> {
    gen_world(params, &mut seed::stream(seed, label, index))
}

/// Edge outcomes of `count` worlds from stream `label`, in index order.
pub fn sample_outcomes(graph: &Graph2D, params: &WorldParams, seed: u64, label: &str, count: usize) -> Result<Vec<GroundTruth>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_world(params, seed, label, i as u64).map(|w| collide(graph, &w)))
        .collect()
}

fn path_valid(path: &[usize], outcome: &GroundTruth) -> bool {
    path.iter().all(|&e| outcome.0[e])
}

/// Distinct shortest valid paths of the training worlds, in order of first
/// appearance. Worlds without a valid path contribute nothing.
pub fn candidate_paths(graph: &Graph2D, train: &[GroundTruth]) -> Vec<Vec<usize>> {
    let found: Vec<Option<Vec<usize>>> = train
        .par_iter()
        .map(|o| graph.shortest_path(|e| o.0[e]))
        .collect();
    let mut seen = std::collections::HashSet::new();
    found
        .into_iter()
        .flatten()
        .filter(|p| seen.insert(p.clone()))
        .collect()
}

/// Greedy maximum coverage over training worlds: repeatedly add the candidate
/// valid in the most uncovered worlds (earliest candidate on ties) until
/// `budget` paths are chosen or no candidate covers anything new.
pub fn greedy_library(graph: &Graph2D, train: &[GroundTruth], budget: usize) -> Result<Vec<Vec<usize>>> {
    let candidates = candidate_paths(graph, train);
    if candidates.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let valid: Vec<Vec<bool>> = candidates
        .par_iter()
        .map(|p| train.iter().map(|o| path_valid(p, o)).collect())
        .collect();
    let mut covered = vec![false; train.len()];
    let mut used = vec![false; candidates.len()];
    let mut library = Vec::new();
    while library.len() < budget {
        let mut best: Option<(usize, usize)> = None;
        for (c, v) in valid.iter().enumerate() {
            if used[c] {
                continue;
            }
            let gain = v.iter().zip(&covered).filter(|&(&ok, &cov)| ok && !cov).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((c, gain));
            }
        }
        let Some((c, _)) = best else { break };
        used[c] = true;
        for (cov, &ok) in covered.iter_mut().zip(&valid[c]) {
            *cov |= ok;
        }
        library.push(candidates[c].clone());
    }
    Ok(library)
}

/// Fraction of `worlds` in which at least one of `paths` is valid.
pub fn coverage(paths: &[Vec<usize>], worlds: &[GroundTruth]) -> f64 {
    if worlds.is_empty() {
        return 0.0;
    }
    let hit = worlds
        .iter()
        .filter(|o| paths.iter().any(|p| path_valid(p, o)))
        .count();
    hit as f64 / worlds.len() as f64
}

/// Trains a library on `graph` and turns it into an instance whose biases are
/// Laplace-smoothed edge validity frequencies over separate worlds.
pub fn build_path_library(graph: &Graph2D, params: &LibraryParams, seed: u64) -> Result<ProblemInstance> {
    if params.num_train == 0 || params.num_bias_worlds == 0 {
        return Err(Error::InvalidParams("num_train and num_bias_worlds must be positive".into()));
    }
    let train = sample_outcomes(graph, &params.world, seed, "train-world", params.num_train)?;
    let paths = greedy_library(graph, &train, params.library_size)?;
    let held_out = sample_outcomes(graph, &params.world, seed, "bias-world", params.num_bias_worlds)?;
    let bias = estimate_bias(&held_out, graph.num_edges())?;
    let mut inst = paths_to_instance(graph, &paths, &bias)?;
    inst.meta_mut().insert(
        "training_coverage".into(),
        serde_json::json!(coverage(&paths, &train)),
    );
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::graph::gen_rgg;
    use rand::seq::SliceRandom;

    #[test]
    fn one_world_gives_its_shortest_path() {
        let g = gen_rgg(50, None, 2).unwrap();
        let world = GroundTruth(vec![true; g.num_edges()]);
        let lib = greedy_library(&g, std::slice::from_ref(&world), 10).unwrap();
        assert_eq!(lib, vec![g.shortest_path(|_| true).unwrap()]);
    }

    #[test]
    fn identical_worlds_give_one_path() {
        let g = gen_rgg(50, None, 2).unwrap();
        let world = sample_outcomes(&g, &WorldParams::default(), 4, "w", 1).unwrap().remove(0);
        let worlds = vec![world; 5];
        match greedy_library(&g, &worlds, 10) {
            Ok(lib) => assert_eq!(lib.len(), 1),
            Err(Error::EmptyLibrary) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn no_valid_world_is_an_error() {
        let g = gen_rgg(30, None, 2).unwrap();
        let worlds = vec![GroundTruth(vec![false; g.num_edges()]); 3];
        assert!(matches!(greedy_library(&g, &worlds, 5), Err(Error::EmptyLibrary)));
    }

    #[test]
    fn greedy_covers_at_least_as_much_as_random_candidates() {
        let g = gen_rgg(100, None, 8).unwrap();
        let p = WorldParams::default();
        let train = sample_outcomes(&g, &p, 8, "train", 200).unwrap();
        let fresh = sample_outcomes(&g, &p, 8, "fresh", 100).unwrap();
        let budget = 20;
        let lib = greedy_library(&g, &train, budget).unwrap();
        let mut cands = candidate_paths(&g, &train);
        cands.shuffle(&mut seed::stream(8, "shuffle", 0));
        cands.truncate(lib.len());
        assert!(coverage(&lib, &fresh) >= coverage(&cands, &fresh));
    }
}
