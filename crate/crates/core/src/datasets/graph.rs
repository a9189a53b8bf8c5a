//! Planar graphs: random geometric graphs, shortest paths, and a plain-text format.
//!
//! Text format (`graph2d v1`), one item per line:
//!
//! ```text
//! graph2d v1
//! vertices <N>
//! <x> <y>            (N lines)
//! edges <M>
//! <u> <v>            (M lines, u < v)
//! start <s>
//! goal <g>
//! ```

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph2D {
    vertices: Vec<[f64; 2]>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>, // (neighbor, edge index)
    start: usize,
    goal: usize,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `2·sqrt(ln n / (π n))`, twice the connectivity threshold of a random geometric graph.
pub fn default_radius(num_vertices: usize) -> f64 {
    let n = num_vertices as f64;
    2.0 * (n.ln() / (std::f64::consts::PI * n)).sqrt()
}

impl Graph2D {
    /// Builds a graph from explicit parts. Edges are normalized to `u < v`.
    pub fn new(vertices: Vec<[f64; 2]>, edges: Vec<(usize, usize)>, start: usize, goal: usize) -> Result<Self> {
        let n = vertices.len();
        if start >= n || goal >= n || start == goal {
            return Err(Error::InvalidParams(format!(
                "start {start} / goal {goal} invalid for {n} vertices"
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(edges.len());
        let mut seen = std::collections::HashSet::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidParams(format!("bad edge {i}: ({u}, {v})")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::InvalidParams(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            adjacency[e.0].push((e.1, i));
            adjacency[e.1].push((e.0, i));
            normalized.push(e);
        }
        Ok(Graph2D {
            vertices,
            edges: normalized,
            adjacency,
            start,
            goal,
        })
    }

    /// Connects every pair of points within `radius`; start and goal are the
    /// points nearest `(0,0)` and `(1,1)`.
    pub fn from_points(points: Vec<[f64; 2]>, radius: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParams("need at least two vertices".into()));
        }
        let nearest = |target: [f64; 2], skip: Option<usize>| {
            (0..points.len())
                .filter(|&i| Some(i) != skip)
                .min_by(|&a, &b| dist(points[a], target).total_cmp(&dist(points[b], target)))
                .expect("at least two points")
        };
        let start = nearest([0.0, 0.0], None);
        let goal = nearest([1.0, 1.0], Some(start));
        let mut edges = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if dist(points[i], points[j]) <= radius {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph2D::new(points, edges, start, goal)?;
        if !g.connected() {
            return Err(Error::DisconnectedStartGoal);
        }
        Ok(g)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (u, v) = self.edges[e];
        dist(self.vertices[u], self.vertices[v])
    }

    pub fn edge_segment(&self, e: usize) -> ([f64; 2], [f64; 2]) {
        let (u, v) = self.edges[e];
        (self.vertices[u], self.vertices[v])
    }

    /// Whether start reaches goal over all edges.
    pub fn connected(&self) -> bool {
        let mut seen = vec![false; self.num_vertices()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(u) = queue.pop_front() {
            if u == self.goal {
                return true;
            }
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        false
    }

    /// Shortest start→goal path by Euclidean length over edges accepted by
    /// `allowed`, as a list of edge indices. Equal-length alternatives resolve
    /// to the lexicographically smallest vertex sequence.
    pub fn shortest_path<F: Fn(usize) -> bool>(&self, allowed: F) -> Option<Vec<usize>> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let n = self.num_vertices();
        let mut best = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n]; // (vertex, edge)
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        best[self.start] = 0.0;
        heap.push(Item(0.0, self.start));
        while let Some(Item(d, u)) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == self.goal {
                break;
            }
            for &(v, e) in &self.adjacency[u] {
                if done[v] || !allowed(e) {
                    continue;
                }
                let nd = d + self.edge_length(e);
                let better = nd < best[v]
                    || (nd == best[v] && self.vertex_path(&pred, u, Some(v)) < self.vertex_path(&pred, v, None));
                if better {
                    best[v] = nd;
                    pred[v] = Some((u, e));
                    heap.push(Item(nd, v));
                }
            }
        }
        if !done[self.goal] {
            return None;
        }
        let mut path = Vec::new();
        let mut v = self.goal;
        while let Some((u, e)) = pred[v] {
            path.push(e);
            v = u;
        }
        path.reverse();
        Some(path)
    }

    fn vertex_path(&self, pred: &[Option<(usize, usize)>], mut v: usize, tail: Option<usize>) -> Vec<usize> {
        let mut out: Vec<usize> = tail.into_iter().collect();
        out.push(v);
        while let Some((u, _)) = pred[v] {
            out.push(u);
            v = u;
        }
        out.reverse();
        out
    }

    /// Vertex sequence of a start→goal path given as edge indices.
    pub fn path_vertices(&self, path: &[usize]) -> Vec<usize> {
        let mut out = vec![self.start];
        let mut at = self.start;
        for &e in path {
            let (u, v) = self.edges[e];
            at = if u == at { v } else { u };
            out.push(at);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("graph2d v1\n");
        writeln!(s, "vertices {}", self.vertices.len()).unwrap();
        for p in &self.vertices {
            writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
        }
        writeln!(s, "edges {}", self.edges.len()).unwrap();
        for (u, v) in &self.edges {
            writeln!(s, "{u} {v}").unwrap();
        }
        writeln!(s, "start {}", self.start).unwrap();
        writeln!(s, "goal {}", self.goal).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParams(format!("graph2d: {m}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("graph2d v1") {
            return Err(bad("missing header"));
        }
        let count = |key: &str, line: Option<&str>| -> Result<usize> {
            let line = line.ok_or_else(|| bad("truncated"))?;
            line.strip_prefix(key)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| bad(&format!("expected `{key} <n>`")))
        };
        let nv = count("vertices", lines.next())?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let xy: Vec<f64> = lines
                .next()
                .ok_or_else(|| bad("truncated"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad coordinate")))
                .collect::<Result<_>>()?;
            if xy.len() != 2 {
                return Err(bad("vertex needs two coordinates"));
            }
            vertices.push([xy[0], xy[1]]);
        }
        let ne = count("edges", lines.next())?;
        let mut edges = Vec::with_capacity(ne);
        for _ in 0..ne {
            let uv: Vec<usize> = lines
                .next()
                .ok_or_else(|| bad("truncated"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad vertex index")))
                .collect::<Result<_>>()?;
            if uv.len() != 2 {
                return Err(bad("edge needs two endpoints"));
            }
            edges.push((uv[0], uv[1]));
        }
        let start = count("start", lines.next())?;
        let goal = count("goal", lines.next())?;
        Graph2D::new(vertices, edges, start, goal)
    }
}

/// Random geometric graph with `num_vertices` uniform points in the unit square.
pub fn gen_rgg(num_vertices: usize, radius: Option<f64>, seed: u64) -> Result<Graph2D> {
    if num_vertices < 2 {
        return Err(Error::InvalidParams("need at least two vertices".into()));
    }
    let radius = radius.unwrap_or_else(|| default_radius(num_vertices));
    let mut rng = seed::stream(seed, "rgg", 0);
    let points: Vec<[f64; 2]> = (0..num_vertices)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    Graph2D::from_points(points, radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_forced_points() {
        let g = Graph2D::from_points(vec![[0.1, 0.1], [0.9, 0.9]], 2.0).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!((g.start(), g.goal()), (0, 1));
        assert_eq!(g.shortest_path(|_| true), Some(vec![0]));
    }

    #[test]
    fn zero_radius_disconnects() {
        assert!(matches!(gen_rgg(20, Some(0.0), 1), Err(Error::DisconnectedStartGoal)));
    }

    #[test]
    fn default_radius_is_usually_connected() {
        let ok = (0..200).filter(|&s| gen_rgg(100, None, s).is_ok()).count();
        assert!(ok >= 190, "{ok}/200 connected");
    }

    #[test]
    fn text_round_trip() {
        let g = gen_rgg(30, Some(0.5), 4).unwrap();
        assert_eq!(Graph2D::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn shortest_path_prefers_shorter_and_breaks_ties_lexicographically() {
        // square: 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1); both routes have length 2.
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let g = Graph2D::new(pts, vec![(0, 2), (2, 3), (0, 1), (1, 3)], 0, 3).unwrap();
        let p = g.shortest_path(|_| true).unwrap();
        assert_eq!(g.path_vertices(&p), vec![0, 1, 3]);
        let p = g.shortest_path(|e| e != 2).unwrap();
        assert_eq!(g.path_vertices(&p), vec![0, 2, 3]);
        assert_eq!(g.shortest_path(|e| e != 2 && e != 1), None);
    }
}
