//! Binary occupancy worlds over the unit square, their generators, and edge
//! collision checking.
//!
//! Cell `(i, j)` covers `[i/w, (i+1)/w] × [j/h, (j+1)/h]`; storage is row-major
//! with row `j = 0` at `y = 0`.
//!
//! Text format (`worldmap v1`):
//!
//! ```text
//! worldmap v1
//! size <w> <h>
//! params <json>
//! rle <v>:<n> <v>:<n> ...     (row-major runs of 0 = free, 1 = occupied)
//! ```

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GroundTruth;

use super::graph::Graph2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    Forest,
    OneWall,
    TwoWall,
}

/// Distribution parameters for [`gen_world`]. Lengths are in cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub kind: WorldKind,
    pub resolution: usize,
    pub wall_thickness: usize,
    pub gaps: usize,
    pub gap_width: usize,
    pub scatter: usize,
    pub scatter_side: usize,
    /// Wall height range for the single wall.
    pub one_wall_height: (f64, f64),
    /// Height ranges for the lower and upper wall.
    pub two_wall_heights: [(f64, f64); 2],
    pub clusters: usize,
    pub squares_per_cluster: usize,
    pub square_side: usize,
    pub cluster_sigma: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            kind: WorldKind::OneWall,
            resolution: 100,
            wall_thickness: 3,
            gaps: 2,
            gap_width: 6,
            scatter: 10,
            scatter_side: 5,
            one_wall_height: (0.3, 0.7),
            two_wall_heights: [(0.3, 0.45), (0.55, 0.7)],
            clusters: 8,
            squares_per_cluster: 12,
            square_side: 3,
            cluster_sigma: 0.05,
        }
    }
}

impl WorldParams {
    pub fn of_kind(kind: WorldKind) -> Self {
        WorldParams {
            kind,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.resolution == 0 {
            return bad("resolution must be at least 1".into());
        }
        if self.gap_width > self.resolution {
            return bad(format!("gap width {} exceeds resolution {}", self.gap_width, self.resolution));
        }
        if !(self.cluster_sigma >= 0.0 && self.cluster_sigma.is_finite()) {
            return bad("cluster_sigma must be finite and non-negative".into());
        }
        let ranges = std::iter::once(self.one_wall_height).chain(self.two_wall_heights);
        for (lo, hi) in ranges {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(format!("wall height range ({lo}, {hi}) must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    width: usize,
    height: usize,
    cells: Vec<bool>,
    params: Option<WorldParams>,
}

impl WorldMap {
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams("world dimensions must be at least 1".into()));
        }
        Ok(WorldMap {
            width,
            height,
            cells: vec![false; width * height],
            params: None,
        })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        let mut w = Self::empty(width, height)?;
        w.cells.fill(true);
        Ok(w)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn params(&self) -> Option<&WorldParams> {
        self.params.as_ref()
    }

    pub fn occupied(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.cells[j * self.width + i] = value;
    }

    pub fn num_occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Fills the clipped rectangle `[i0, i1) × [j0, j1)`.
    fn fill(&mut self, i0: i64, j0: i64, i1: i64, j1: i64, value: bool) {
        let ci = |x: i64, n: usize| x.clamp(0, n as i64) as usize;
        for j in ci(j0, self.height)..ci(j1, self.height) {
            for i in ci(i0, self.width)..ci(i1, self.width) {
                self.set(i, j, value);
            }
        }
    }

    /// Cell containing point `p`, with points on the far boundary assigned to the last cell.
    pub fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return None;
        }
        let i = ((p[0] * self.width as f64) as usize).min(self.width - 1);
        let j = ((p[1] * self.height as f64) as usize).min(self.height - 1);
        Some((i, j))
    }

    /// Whether the segment `a`–`b` enters an occupied cell, sampled every quarter cell.
    pub fn segment_collides(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        let cell = 1.0 / self.width.max(self.height) as f64;
        let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let steps = ((len / (0.25 * cell)).ceil() as usize).max(1);
        (0..=steps).any(|k| {
            let s = k as f64 / steps as f64;
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            self.cell_of(p).is_some_and(|(i, j)| self.occupied(i, j))
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("worldmap v1\n");
        writeln!(s, "size {} {}", self.width, self.height).unwrap();
        let params = serde_json::to_string(&self.params).expect("params serialize");
        writeln!(s, "params {params}").unwrap();
        s.push_str("rle");
        let mut runs = self.cells.chunk_by(|a, b| a == b);
        for run in &mut runs {
            write!(s, " {}:{}", run[0] as u8, run.len()).unwrap();
        }
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParams(format!("worldmap: {m}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("worldmap v1") {
            return Err(bad("missing header"));
        }
        let size: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("size"))
            .ok_or_else(|| bad("expected `size <w> <h>`"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad size")))
            .collect::<Result<_>>()?;
        if size.len() != 2 {
            return Err(bad("expected `size <w> <h>`"));
        }
        let mut world = WorldMap::empty(size[0], size[1])?;
        let params = lines
            .next()
            .and_then(|l| l.strip_prefix("params"))
            .ok_or_else(|| bad("expected `params <json>`"))?;
        world.params = serde_json::from_str(params.trim())?;
        let rle = lines
            .next()
            .and_then(|l| l.strip_prefix("rle"))
            .ok_or_else(|| bad("expected `rle ...`"))?;
        let mut at = 0;
        for run in rle.split_whitespace() {
            let (v, n) = run.split_once(':').ok_or_else(|| bad("bad run"))?;
            let n: usize = n.parse().map_err(|_| bad("bad run length"))?;
            let v = match v {
                "0" => false,
                "1" => true,
                _ => return Err(bad("run value must be 0 or 1")),
            };
            if at + n > world.cells.len() {
                return Err(bad("runs exceed grid size"));
            }
            world.cells[at..at + n].fill(v);
            at += n;
        }
        if at != world.cells.len() {
            return Err(bad("runs do not cover the grid"));
        }
        Ok(world)
    }
}

fn add_wall<R: Rng + ?Sized>(world: &mut WorldMap, p: &WorldParams, range: (f64, f64), rng: &mut R) {
    let h = world.height as f64;
    let y = if range.0 < range.1 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    };
    let j0 = (y * h).floor() as i64;
    let j1 = j0 + p.wall_thickness as i64;
    world.fill(0, j0, world.width as i64, j1, true);
    for _ in 0..p.gaps {
        let i0 = rng.random_range(0..=world.width - p.gap_width) as i64;
        world.fill(i0, j0, i0 + p.gap_width as i64, j1, false);
    }
}

fn add_square(world: &mut WorldMap, center: [f64; 2], side: usize) {
    let ci = (center[0] * world.width as f64).floor() as i64;
    let cj = (center[1] * world.height as f64).floor() as i64;
    let half = side as i64 / 2;
    world.fill(ci - half, cj - half, ci - half + side as i64, cj - half + side as i64, true);
}

/// Samples a world from the distribution described by `params`.
pub fn gen_world<R: Rng + ?Sized>(params: &WorldParams, rng: &mut R) -> Result<WorldMap> {
    params.check()?;
    let mut world = WorldMap::empty(params.resolution, params.resolution)?;
    match params.kind {
        WorldKind::OneWall | WorldKind::TwoWall => {
            if params.kind == WorldKind::OneWall {
                add_wall(&mut world, params, params.one_wall_height, rng);
            } else {
                for range in params.two_wall_heights {
                    add_wall(&mut world, params, range, rng);
                }
            }
            for _ in 0..params.scatter {
                let c = [rng.random::<f64>(), rng.random::<f64>()];
                add_square(&mut world, c, params.scatter_side);
            }
        }
        WorldKind::Forest => {
            let offset = Normal::new(0.0, params.cluster_sigma).expect("sigma checked");
            for _ in 0..params.clusters {
                let center = [rng.random::<f64>(), rng.random::<f64>()];
                for _ in 0..params.squares_per_cluster {
                    let c = [center[0] + offset.sample(rng), center[1] + offset.sample(rng)];
                    add_square(&mut world, c, params.square_side);
                }
            }
        }
    }
    world.params = Some(params.clone());
    Ok(world)
}

/// Outcome of every graph edge in `world`: 1 unless the edge enters an occupied cell.
pub fn collide(graph: &Graph2D, world: &WorldMap) -> GroundTruth {
    GroundTruth(
        (0..graph.num_edges())
            .map(|e| {
                let (a, b) = graph.edge_segment(e);
                !world.segment_collides(a, b)
            })
            .collect(),
    )
}

/// Laplace-smoothed validity frequency `(valid + 1) / (n + 2)` of each edge
/// over the given worlds' outcomes.
pub fn estimate_bias(outcomes: &[GroundTruth], num_edges: usize) -> Result<Vec<f64>> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParams("need at least one world".into()));
    }
    let n = outcomes.len() as f64;
    Ok((0..num_edges)
        .map(|e| {
            let valid = outcomes.iter().filter(|o| o.0[e]).count() as f64;
            (valid + 1.0) / (n + 2.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn line_graph() -> Graph2D {
        Graph2D::new(vec![[0.05, 0.5], [0.95, 0.5]], vec![(0, 1)], 0, 1).unwrap()
    }

    #[test]
    fn empty_and_full_maps() {
        let g = line_graph();
        assert_eq!(collide(&g, &WorldMap::empty(10, 10).unwrap()).0, vec![true]);
        assert_eq!(collide(&g, &WorldMap::full(10, 10).unwrap()).0, vec![false]);
    }

    #[test]
    fn single_cell_blocks_crossing_edge() {
        let g = line_graph();
        let mut w = WorldMap::empty(10, 10).unwrap();
        w.set(4, 5, true);
        assert_eq!(collide(&g, &w).0, vec![false]);
        let mut w = WorldMap::empty(10, 10).unwrap();
        w.set(4, 7, true);
        assert_eq!(collide(&g, &w).0, vec![true]);
    }

    #[test]
    fn one_wall_single_gap_leaves_one_corridor() {
        let p = WorldParams {
            scatter: 0,
            gaps: 1,
            ..WorldParams::default()
        };
        let w = gen_world(&p, &mut seed::stream(3, "w", 0)).unwrap();
        let rows: Vec<usize> = (0..w.height())
            .filter(|&j| (0..w.width()).any(|i| w.occupied(i, j)))
            .collect();
        assert_eq!(rows.len(), p.wall_thickness);
        for &j in &rows {
            let free: Vec<usize> = (0..w.width()).filter(|&i| !w.occupied(i, j)).collect();
            assert_eq!(free.len(), p.gap_width);
            assert!(free.windows(2).all(|x| x[1] == x[0] + 1));
        }
    }

    #[test]
    fn forest_without_clusters_is_empty() {
        let p = WorldParams {
            kind: WorldKind::Forest,
            clusters: 0,
            ..WorldParams::default()
        };
        let w = gen_world(&p, &mut seed::stream(3, "w", 0)).unwrap();
        assert_eq!(w.num_occupied(), 0);
    }

    #[test]
    fn default_one_wall_usually_blocks_the_diagonal() {
        let p = WorldParams::default();
        let blocked = (0..200)
            .filter(|&i| {
                let w = gen_world(&p, &mut seed::stream(9, "w", i)).unwrap();
                w.segment_collides([0.0, 0.0], [1.0, 1.0])
            })
            .count();
        assert!(blocked >= 160, "{blocked}/200");
    }

    #[test]
    fn text_round_trip() {
        for kind in [WorldKind::Forest, WorldKind::OneWall, WorldKind::TwoWall] {
            let w = gen_world(&WorldParams::of_kind(kind), &mut seed::stream(1, "w", 0)).unwrap();
            assert_eq!(WorldMap::from_text(&w.to_text()).unwrap(), w);
        }
    }

    #[test]
    fn laplace_smoothing() {
        let all = vec![GroundTruth(vec![true, false]); 8];
        assert_eq!(estimate_bias(&all, 2).unwrap(), vec![0.9, 0.1]);
        assert!(estimate_bias(&[], 2).is_err());
    }

    #[test]
    fn bias_estimate_converges() {
        let mut rng = seed::stream(5, "b", 0);
        let outcomes: Vec<GroundTruth> = (0..10_000)
            .map(|_| GroundTruth(vec![rng.random::<f64>() < 0.7]))
            .collect();
        let est = estimate_bias(&outcomes, 1).unwrap()[0];
        assert!((est - 0.7).abs() < 0.02, "{est}");
    }
}
