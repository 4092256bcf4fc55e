use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeSpec {
    edges: Vec<TreeEdge>,
}

/// Finite metric tree. Points are `(edge, offset)` with the offset measured
/// from `edge.a`; a vertex is always represented on its lowest-numbered
/// incident edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TreeSpec", into = "TreeSpec")]
pub struct MetricTree {
    edges: Vec<TreeEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    vertex_distance: Vec<Vec<f64>>,
    canonical_edge: Vec<usize>,
}

impl PartialEq for MetricTree {
    fn eq(&self, other: &Self) -> bool {
        self.edges == other.edges
    }
}

impl From<MetricTree> for TreeSpec {
    fn from(t: MetricTree) -> Self {
        TreeSpec { edges: t.edges }
    }
}

impl TryFrom<TreeSpec> for MetricTree {
    type Error = LabError;
    fn try_from(s: TreeSpec) -> Result<Self> {
        MetricTree::new(s.edges)
    }
}

impl MetricTree {
    pub fn new(edges: Vec<TreeEdge>) -> Result<Self> {
        if edges.is_empty() {
            return Err(LabError::InvalidParameter("tree needs at least one edge".into()));
        }
        let nv = edges.iter().map(|e| e.a.max(e.b)).max().unwrap() + 1;
        if edges.len() + 1 != nv {
            return Err(LabError::InvalidParameter(format!(
                "{} edges on {nv} vertices cannot form a tree",
                edges.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); nv];
        for (id, e) in edges.iter().enumerate() {
            if e.a == e.b || !(e.length > 0.0) || !e.length.is_finite() {
                return Err(LabError::InvalidParameter(format!("bad tree edge {e:?}")));
            }
            adjacency[e.a].push((e.b, id));
            adjacency[e.b].push((e.a, id));
        }
        let mut vertex_distance = vec![vec![f64::INFINITY; nv]; nv];
        for (src, row) in vertex_distance.iter_mut().enumerate() {
            row[src] = 0.0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &(w, id) in &adjacency[u] {
                    if row[w].is_infinite() {
                        row[w] = row[u] + edges[id].length;
                        queue.push_back(w);
                    }
                }
            }
            if row.iter().any(|d| d.is_infinite()) {
                return Err(LabError::InvalidParameter("tree is not connected".into()));
            }
        }
        let canonical_edge = adjacency
            .iter()
            .map(|nb| nb.iter().map(|&(_, id)| id).min().unwrap())
            .collect();
        Ok(Self {
            edges,
            adjacency,
            vertex_distance,
            canonical_edge,
        })
    }

    /// Star with vertex 0 at the centre and `rays` edges of equal length.
    pub fn star(rays: usize, length: f64) -> Result<Self> {
        Self::new(
            (0..rays)
                .map(|i| TreeEdge {
                    a: 0,
                    b: i + 1,
                    length,
                })
                .collect(),
        )
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn vertex_distance(&self, u: usize, v: usize) -> f64 {
        self.vertex_distance[u][v]
    }

    pub(crate) fn check_point(&self, edge: usize, offset: f64) -> Result<()> {
        let Some(e) = self.edges.get(edge) else {
            return Err(LabError::SpaceMismatch(format!("no tree edge {edge}")));
        };
        if !(0.0..=e.length).contains(&offset) {
            return Err(LabError::SpaceMismatch(format!(
                "offset {offset} outside edge {edge} of length {}",
                e.length
            )));
        }
        Ok(())
    }

    /// Representative of the vertex `v`.
    pub fn vertex_point(&self, v: usize) -> (usize, f64) {
        let id = self.canonical_edge[v];
        let e = self.edges[id];
        (id, if e.a == v { 0.0 } else { e.length })
    }

    /// Clamps the offset into its edge and moves endpoints to their
    /// canonical representative.
    pub fn canonical(&self, edge: usize, offset: f64) -> (usize, f64) {
        let e = self.edges[edge];
        if offset <= 0.0 {
            self.vertex_point(e.a)
        } else if offset >= e.length {
            self.vertex_point(e.b)
        } else {
            (edge, offset)
        }
    }

    /// Distance from a point to a tree vertex.
    pub fn to_vertex(&self, p: (usize, f64), v: usize) -> f64 {
        let e = self.edges[p.0];
        (p.1 + self.vertex_distance[e.a][v]).min(e.length - p.1 + self.vertex_distance[e.b][v])
    }

    /// Exit vertex from `p`'s edge and entry vertex into `q`'s edge on the
    /// path between them (edges assumed distinct), with the path length.
    fn route(&self, p: (usize, f64), q: (usize, f64)) -> (usize, usize, f64) {
        let (ep, eq) = (self.edges[p.0], self.edges[q.0]);
        let exits = [(ep.a, p.1), (ep.b, ep.length - p.1)];
        let entries = [(eq.a, q.1), (eq.b, eq.length - q.1)];
        let mut best = (ep.a, eq.a, f64::INFINITY);
        for &(x, dx) in &exits {
            for &(y, dy) in &entries {
                let d = dx + self.vertex_distance[x][y] + dy;
                if d < best.2 {
                    best = (x, y, d);
                }
            }
        }
        best
    }

    pub fn distance(&self, p: (usize, f64), q: (usize, f64)) -> f64 {
        if p.0 == q.0 {
            return (p.1 - q.1).abs();
        }
        self.route(p, q).2
    }

    pub fn interpolate(&self, p: (usize, f64), q: (usize, f64), t: f64) -> (usize, f64) {
        if t == 0.0 {
            return self.canonical(p.0, p.1);
        }
        if t == 1.0 {
            return self.canonical(q.0, q.1);
        }
        if p.0 == q.0 {
            return self.canonical(p.0, p.1 + t * (q.1 - p.1));
        }
        let (x, y, d) = self.route(p, q);
        let mut s = t * d;
        let ep = self.edges[p.0];
        let leg = if x == ep.a { p.1 } else { ep.length - p.1 };
        if s <= leg {
            let off = if x == ep.a { p.1 - s } else { p.1 + s };
            return self.canonical(p.0, off);
        }
        s -= leg;
        let mut u = x;
        while u != y {
            let &(w, id) = self.adjacency[u]
                .iter()
                .min_by(|l, r| {
                    self.vertex_distance[l.0][y]
                        .partial_cmp(&self.vertex_distance[r.0][y])
                        .unwrap()
                })
                .unwrap();
            let e = self.edges[id];
            if s <= e.length {
                let off = if e.a == u { s } else { e.length - s };
                return self.canonical(id, off);
            }
            s -= e.length;
            u = w;
        }
        let eq = self.edges[q.0];
        let off = if y == eq.a { s.min(q.1) } else { (eq.length - s).max(q.1) };
        self.canonical(q.0, off)
    }

    /// Exact weighted Fréchet mean: on each edge the objective is a
    /// quadratic in the offset, so the per-edge minimizer is a clamped
    /// weighted average.
    pub fn frechet_mean(&self, points: &[((usize, f64), f64)]) -> ((usize, f64), f64) {
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        let mut best = ((0, 0.0), f64::INFINITY);
        for (id, e) in self.edges.iter().enumerate() {
            let anchors: Vec<(f64, f64)> = points
                .iter()
                .map(|&(p, w)| {
                    if p.0 == id {
                        return (p.1, w);
                    }
                    let da = self.to_vertex(p, e.a);
                    let db = self.to_vertex(p, e.b);
                    if da <= db {
                        (-da, w)
                    } else {
                        (e.length + db, w)
                    }
                })
                .collect();
            let mean = anchors.iter().map(|(m, w)| m * w).sum::<f64>() / total;
            let s = mean.clamp(0.0, e.length);
            let f: f64 = anchors.iter().map(|(m, w)| w * (s - m) * (s - m)).sum();
            if f < best.1 {
                best = (self.canonical(id, s), f);
            }
        }
        best
    }
}
