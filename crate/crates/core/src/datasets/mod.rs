//! Benchmark generators and the dataset bundle file format.
//!
//! A bundle is an instance file with two extra top-level fields:
//! `ground_truths` (one 0/1 array per benchmark problem) and `provenance`
//! (generator name, parameters, master seed). Plain instance files load as
//! bundles with no ground truths.

pub mod disparity;
pub mod gbg;
pub mod graph;
pub mod library;
pub mod synthetic;
pub mod world;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_instance, GroundTruth, ProblemInstance, RawInstance, ValidationOptions};
use crate::runner::{self, Conditioning};
use crate::seed;

use self::disparity::DisparityParams;
use self::gbg::GbgParams;
use self::graph::Graph2D;
use self::library::LibraryParams;
use self::synthetic::SyntheticParams;

/// Which generator to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticParams),
    Gbg(GbgParams),
    World(LibraryParams),
    Disparity(DisparityParams),
}

impl DatasetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::Synthetic(_) => "synthetic",
            DatasetSpec::Gbg(_) => "gbg",
            DatasetSpec::World(_) => "world",
            DatasetSpec::Disparity(_) => "disparity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub num_problems: usize,
    pub conditioning: Conditioning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub instance: ProblemInstance,
    pub ground_truths: Vec<GroundTruth>,
    pub provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    num_tests: usize,
    bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<Vec<f64>>,
    regions: Vec<Vec<usize>>,
    #[serde(default)]
    meta: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    ground_truths: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl DatasetBundle {
    pub fn from_json_reader<R: Read>(reader: R, opts: ValidationOptions) -> Result<Self> {
        let file: BundleFile = serde_json::from_reader(reader)?;
        let instance = validate_instance(
            RawInstance {
                num_tests: file.num_tests,
                bias: file.bias,
                cost: file.cost,
                regions: file.regions,
                meta: file.meta,
            },
            opts,
        )?;
        let mut ground_truths = Vec::with_capacity(file.ground_truths.len());
        for bits in &file.ground_truths {
            if bits.len() != instance.num_tests() {
                return Err(Error::LengthMismatch {
                    what: "ground truth",
                    expected: instance.num_tests(),
                    found: bits.len(),
                });
            }
            if bits.iter().any(|&b| b > 1) {
                return Err(Error::InvalidParams("ground truth entries must be 0 or 1".into()));
            }
            ground_truths.push(GroundTruth::from_bits(bits));
        }
        Ok(DatasetBundle {
            instance,
            ground_truths,
            provenance: file.provenance,
        })
    }

    pub fn read_json(path: &Path, opts: ValidationOptions) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_json_reader(std::io::BufReader::new(file), opts)
    }

    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        let raw = self.instance.to_raw();
        let file = BundleFile {
            num_tests: raw.num_tests,
            bias: raw.bias,
            cost: raw.cost,
            regions: raw.regions,
            meta: raw.meta,
            ground_truths: self.ground_truths.iter().map(GroundTruth::to_bits).collect(),
            provenance: self.provenance.clone(),
        };
        serde_json::to_writer_pretty(&mut writer, &file)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }
}

/// Turns start→goal paths (lists of graph edge indices) into an instance.
/// Tests are the graph edges used by some path, in increasing edge order;
/// `meta.edges` maps each test back to its `[u, v]` graph edge and
/// `meta.edge_ids` to its index in the graph.
pub fn paths_to_instance(graph: &Graph2D, paths: &[Vec<usize>], edge_bias: &[f64]) -> Result<ProblemInstance> {
    let mut used: Vec<usize> = paths.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut test_of = vec![usize::MAX; graph.num_edges()];
    for (t, &e) in used.iter().enumerate() {
        test_of[e] = t;
    }
    let regions: Vec<Vec<usize>> = paths
        .iter()
        .map(|p| {
            let mut r: Vec<usize> = p.iter().map(|&e| test_of[e]).collect();
            r.sort_unstable();
            r
        })
        .collect();
    let bias: Vec<f64> = used.iter().map(|&e| edge_bias[e]).collect();
    let mut raw = RawInstance {
        num_tests: used.len(),
        bias,
        cost: None,
        regions,
        meta: Default::default(),
    };
    raw.meta.insert(
        "edges".into(),
        serde_json::json!(used.iter().map(|&e| [graph.edges()[e].0, graph.edges()[e].1]).collect::<Vec<_>>()),
    );
    raw.meta.insert("edge_ids".into(), serde_json::json!(used));
    raw.meta.insert("graph".into(), serde_json::json!(graph.to_text()));
    validate_instance(raw, ValidationOptions::default())
}

/// Graph edge index of every test, from `meta.edge_ids`.
pub fn test_edges(instance: &ProblemInstance) -> Result<Vec<usize>> {
    let ids = instance
        .meta()
        .get("edge_ids")
        .ok_or_else(|| Error::InvalidParams("instance has no edge_ids metadata".into()))?;
    serde_json::from_value(ids.clone()).map_err(Error::from)
}

/// Runs the generator in `spec` and draws `num_problems` ground truths.
///
/// Truths for `synthetic`, `gbg` and `disparity` are drawn from the instance's
/// own independent prior. For `world` they come from colliding the graph with
/// freshly sampled worlds, so edges are correlated in truth but independent in
/// the prior; under `AtLeastOneValid` worlds with no valid library path are
/// redrawn.
pub fn generate(spec: &DatasetSpec, num_problems: usize, conditioning: Conditioning, master: u64) -> Result<DatasetBundle> {
    let (instance, ground_truths) = match spec {
        DatasetSpec::Synthetic(p) => {
            let inst = synthetic::synthetic_instance(p, &mut seed::stream(master, "synthetic", 0))?;
            let truths = runner::sample_truths(&inst, conditioning, num_problems, master, "truth")?;
            (inst, truths)
        }
        DatasetSpec::Gbg(p) => {
            let g = graph::gen_rgg(p.num_vertices, p.radius, seed::derive(master, "graph", 0))?;
            let inst = gbg::gen_gbg_paths(&g, p, seed::derive(master, "gbg", 0))?;
            let truths = runner::sample_truths(&inst, conditioning, num_problems, master, "truth")?;
            (inst, truths)
        }
        DatasetSpec::Disparity(p) => {
            let inst = disparity::gen_disparity(p)?;
            let truths = runner::sample_truths(&inst, conditioning, num_problems, master, "truth")?;
            (inst, truths)
        }
        DatasetSpec::World(p) => {
            let g = graph::gen_rgg(p.num_vertices, p.radius, seed::derive(master, "graph", 0))?;
            let inst = library::build_path_library(&g, p, seed::derive(master, "library", 0))?;
            let truths = world_truths(&g, &inst, p, conditioning, num_problems, master)?;
            (inst, truths)
        }
    };
    let provenance = Provenance {
        generator: spec.name().to_string(),
        params: serde_json::to_value(spec)?,
        seed: master,
        num_problems,
        conditioning,
    };
    Ok(DatasetBundle {
        instance,
        ground_truths,
        provenance: Some(provenance),
    })
}

/// Test worlds per problem before giving up on finding one with a valid path.
const WORLD_ATTEMPTS: u64 = 1_000;

fn world_truths(
    graph: &Graph2D,
    instance: &ProblemInstance,
    params: &LibraryParams,
    conditioning: Conditioning,
    count: usize,
    master: u64,
) -> Result<Vec<GroundTruth>> {
    use rayon::prelude::*;
    let edges = test_edges(instance)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..WORLD_ATTEMPTS {
                let index = i as u64 * WORLD_ATTEMPTS + attempt;
                let world = library::sample_world(&params.world, master, "test-world", index)?;
                let truth = GroundTruth(
                    edges
                        .iter()
                        .map(|&e| {
                            let (a, b) = graph.edge_segment(e);
                            !world.segment_collides(a, b)
                        })
                        .collect(),
                );
                if conditioning == Conditioning::All || truth.validates_some_region(instance) {
                    return Ok(truth);
                }
            }
            Err(Error::RejectionCapExceeded {
                attempts: WORLD_ATTEMPTS,
                accepted: 0,
                rate: 0.0,
            })
        })
        .collect()
}
