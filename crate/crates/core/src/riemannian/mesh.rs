use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::chart::ExactModel;
use super::curvature::CurvatureData;
use crate::error::{LabError, Result};

/// Model domains that [`build_mesh`] knows how to triangulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainTag {
    /// `[0, l1) × [0, l2)` with periodic identification.
    FlatTorus { l1: f64, l2: f64 },
    /// The unit square `[0, 1]²`.
    FlatSquare,
    /// Round sphere of the given radius.
    RoundSphere { radius: f64 },
    /// Geodesic disk of the given radius in the curvature −1 plane, stored in
    /// Poincaré disk coordinates.
    HyperbolicPatch { radius: f64 },
}

impl DomainTag {
    pub fn exact_model(&self) -> ExactModel {
        match *self {
            DomainTag::FlatTorus { .. } | DomainTag::FlatSquare => ExactModel::Flat,
            DomainTag::RoundSphere { radius } => ExactModel::RoundSphere { radius },
            DomainTag::HyperbolicPatch { .. } => ExactModel::Hyperbolic { radius: 1.0 },
        }
    }

    /// Riemannian area of the whole domain.
    pub fn exact_area(&self) -> f64 {
        match *self {
            DomainTag::FlatTorus { l1, l2 } => l1 * l2,
            DomainTag::FlatSquare => 1.0,
            DomainTag::RoundSphere { radius } => 4.0 * PI * radius * radius,
            DomainTag::HyperbolicPatch { radius } => 2.0 * PI * (radius.cosh() - 1.0),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, DomainTag::FlatTorus { .. } | DomainTag::FlatSquare)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainTag::FlatTorus { l1, l2 } => l1 > 0.0 && l2 > 0.0,
            DomainTag::FlatSquare => true,
            DomainTag::RoundSphere { radius } => radius > 0.0,
            DomainTag::HyperbolicPatch { radius } => radius > 0.0 && radius < 6.0,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::InvalidParameter(format!("bad domain parameters {self:?}")))
        }
    }

    /// Coordinates of `q` in normal coordinates centred at `p`, expressed in
    /// the orthonormal frame that this domain fixes at `p`.
    pub fn log_map(&self, p: &[f64; 3], q: &[f64; 3]) -> [f64; 2] {
        match *self {
            DomainTag::FlatTorus { l1, l2 } => [wrap(q[0] - p[0], l1), wrap(q[1] - p[1], l2)],
            DomainTag::FlatSquare => [q[0] - p[0], q[1] - p[1]],
            DomainTag::RoundSphere { radius } => {
                let a = scale3(p, 1.0 / radius);
                let b = scale3(q, 1.0 / radius);
                let c = dot3(&a, &b);
                let perp = sub3(&b, &scale3(&a, c));
                let s = norm3(&perp);
                if s == 0.0 {
                    return [0.0, 0.0];
                }
                let theta = s.atan2(c);
                let (e1, e2) = sphere_frame(&a);
                let k = radius * theta / s;
                [k * dot3(&perp, &e1), k * dot3(&perp, &e2)]
            }
            DomainTag::HyperbolicPatch { .. } => {
                let w = mobius(p, q);
                let m = w.0.hypot(w.1);
                if m == 0.0 {
                    return [0.0, 0.0];
                }
                let r = 2.0 * m.atanh();
                [r * w.0 / m, r * w.1 / m]
            }
        }
    }

    pub fn distance(&self, p: &[f64; 3], q: &[f64; 3]) -> f64 {
        match *self {
            DomainTag::RoundSphere { radius } => {
                let a = scale3(p, 1.0 / radius);
                let b = scale3(q, 1.0 / radius);
                radius * norm3(&cross3(&a, &b)).atan2(dot3(&a, &b))
            }
            DomainTag::HyperbolicPatch { .. } => {
                let w = mobius(p, q);
                2.0 * w.0.hypot(w.1).atanh()
            }
            _ => {
                let v = self.log_map(p, q);
                v[0].hypot(v[1])
            }
        }
    }

    /// Largest radius a ball centred at `p` may have while staying inside
    /// the domain and below the injectivity radius.
    pub fn clearance(&self, p: &[f64; 3]) -> f64 {
        match *self {
            DomainTag::FlatTorus { l1, l2 } => 0.5 * l1.min(l2),
            DomainTag::FlatSquare => p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]),
            DomainTag::RoundSphere { radius } => PI * radius,
            DomainTag::HyperbolicPatch { radius } => {
                radius - 2.0 * p[0].hypot(p[1]).atanh()
            }
        }
    }
}

fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn scale3(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
fn normalize3(a: &[f64; 3]) -> [f64; 3] {
    scale3(a, 1.0 / norm3(a))
}

fn sphere_frame(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let z = cross3(&[0.0, 0.0, 1.0], p);
    let e1 = if norm3(&z) > 0.1 {
        normalize3(&z)
    } else {
        normalize3(&cross3(&[1.0, 0.0, 0.0], p))
    };
    let e2 = cross3(p, &e1);
    (e1, e2)
}

/// `(q − p) / (1 − p̄ q)` in complex arithmetic on the first two coordinates.
fn mobius(p: &[f64; 3], q: &[f64; 3]) -> (f64, f64) {
    let (nr, ni) = (q[0] - p[0], q[1] - p[1]);
    // 1 − conj(p)·q
    let dr = 1.0 - (p[0] * q[0] + p[1] * q[1]);
    let di = -(p[0] * q[1] - p[1] * q[0]);
    let den = dr * dr + di * di;
    ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshVertex {
    pub xyz: [f64; 3],
    pub measure: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshEdge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
    pub len: f64,
}

#[derive(Serialize, Deserialize)]
struct MeshRecord {
    vertices: Vec<MeshVertex>,
    edges: Vec<MeshEdge>,
    faces: Vec<[usize; 3]>,
    tag: DomainTag,
}

/// Weighted triangulation of a model domain.
///
/// Edge weights are half the cotangent sums, so `Σ_e w_e (u_i − u_j)²`
/// is the Dirichlet energy `∫|∇u|²` of the piecewise-linear interpolant.
/// Edges whose weight vanishes (the diagonals of a rectangular grid) are
/// kept in `faces` but not in `edges`.
#[derive(Debug, Clone)]
pub struct MeshDomain {
    vertices: Vec<MeshVertex>,
    edges: Vec<MeshEdge>,
    faces: Vec<[usize; 3]>,
    tag: DomainTag,
    mesh_size: f64,
    curvature: CurvatureData,
    adjacency: Vec<Vec<(usize, f64)>>,
    ring: Vec<Vec<usize>>,
}

impl PartialEq for MeshDomain {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.edges == other.edges
            && self.faces == other.faces
            && self.tag == other.tag
    }
}

impl MeshDomain {
    pub fn dimension(&self) -> usize {
        2
    }
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn vertices(&self) -> &[MeshVertex] {
        &self.vertices
    }
    pub fn vertex(&self, v: usize) -> &MeshVertex {
        &self.vertices[v]
    }
    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }
    pub fn tag(&self) -> DomainTag {
        self.tag
    }
    /// Largest length among weighted edges.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }
    /// Curvature symbols at `v` in the frame used by [`Self::log_map`].
    pub fn curvature(&self, _v: usize) -> &CurvatureData {
        &self.curvature
    }
    pub fn measure(&self, v: usize) -> f64 {
        self.vertices[v].measure
    }
    pub fn is_boundary(&self, v: usize) -> bool {
        self.vertices[v].boundary
    }
    /// Weighted edge neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }
    /// All vertices sharing a face with `v`.
    pub fn ring(&self, v: usize) -> &[usize] {
        &self.ring[v]
    }
    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(move |&v| !self.vertices[v].boundary)
    }
    pub fn total_measure(&self) -> f64 {
        self.vertices.iter().map(|v| v.measure).sum()
    }
    pub fn log_map(&self, p: usize, q: usize) -> [f64; 2] {
        self.tag.log_map(&self.vertices[p].xyz, &self.vertices[q].xyz)
    }
    pub fn distance(&self, p: usize, q: usize) -> f64 {
        self.tag.distance(&self.vertices[p].xyz, &self.vertices[q].xyz)
    }
    pub fn clearance(&self, v: usize) -> f64 {
        self.tag.clearance(&self.vertices[v].xyz)
    }

    /// Vertex closest to a point given in the flat chart coordinates of a
    /// torus or square.
    pub fn nearest_flat_vertex(&self, x: f64, y: f64) -> Result<usize> {
        if !self.tag.is_flat() {
            return Err(LabError::InvalidParameter("flat domain required".into()));
        }
        let p = [x, y, 0.0];
        let mut best = (f64::INFINITY, 0);
        for (i, v) in self.vertices.iter().enumerate() {
            let d = self.tag.distance(&p, &v.xyz);
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best.1)
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = MeshRecord {
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            faces: self.faces.clone(),
            tag: self.tag,
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: MeshRecord = serde_json::from_str(s)?;
        Self::from_parts(rec.tag, rec.vertices, rec.edges, rec.faces)
    }

    fn from_parts(
        tag: DomainTag,
        vertices: Vec<MeshVertex>,
        edges: Vec<MeshEdge>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut adjacency = vec![Vec::new(); nv];
        for e in &edges {
            if e.i >= nv || e.j >= nv || e.i == e.j {
                return Err(LabError::MeshConstruction(format!("bad edge ({}, {})", e.i, e.j)));
            }
            if !(e.w > 0.0) || !(e.len > 0.0) {
                return Err(LabError::MeshConstruction(format!(
                    "edge ({}, {}) has weight {} and length {}",
                    e.i, e.j, e.w, e.len
                )));
            }
            adjacency[e.i].push((e.j, e.w));
            adjacency[e.j].push((e.i, e.w));
        }
        let mut ring: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nv];
        for f in &faces {
            for a in 0..3 {
                if f[a] >= nv {
                    return Err(LabError::MeshConstruction(format!("face {f:?} out of range")));
                }
                for b in 0..3 {
                    if a != b {
                        ring[f[a]].insert(f[b]);
                    }
                }
            }
        }
        if let Some(v) = vertices.iter().find(|v| !(v.measure > 0.0)) {
            return Err(LabError::MeshConstruction(format!("non-positive measure {}", v.measure)));
        }
        let mesh_size = edges.iter().map(|e| e.len).fold(0.0, f64::max);
        let curvature = CurvatureData::space_form(2, tag.exact_model().sectional_curvature())?;
        Ok(Self {
            vertices,
            edges,
            faces,
            tag,
            mesh_size,
            curvature,
            adjacency,
            ring: ring.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }
}

/// Triangulates a model domain.
///
/// `resolution` is the number of cells per side for the torus and square,
/// the subdivision frequency of the icosahedron for the sphere, and the
/// number of radial rings for the hyperbolic patch.
pub fn build_mesh(tag: &DomainTag, resolution: usize) -> Result<MeshDomain> {
    tag.validate()?;
    let (xyz, boundary, faces) = match *tag {
        DomainTag::FlatTorus { l1, l2 } => {
            check_resolution(resolution, 8)?;
            torus_grid(l1, l2, resolution)
        }
        DomainTag::FlatSquare => {
            check_resolution(resolution, 8)?;
            square_grid(resolution)
        }
        DomainTag::RoundSphere { radius } => {
            check_resolution(resolution, 2)?;
            icosphere(radius, resolution)
        }
        DomainTag::HyperbolicPatch { radius } => {
            check_resolution(resolution, 3)?;
            let (xyz, boundary, faces) = polar_disk(radius, resolution);
            let faces = delaunay_flips(tag, &xyz, faces)?;
            (xyz, boundary, faces)
        }
    };
    assemble(*tag, xyz, boundary, faces)
}

fn check_resolution(k: usize, min: usize) -> Result<()> {
    if k < min {
        Err(LabError::MeshConstruction(format!("resolution {k} below minimum {min}")))
    } else {
        Ok(())
    }
}

type Raw = (Vec<[f64; 3]>, Vec<bool>, Vec<[usize; 3]>);

fn torus_grid(l1: f64, l2: f64, k: usize) -> Raw {
    let (hx, hy) = (l1 / k as f64, l2 / k as f64);
    let id = |i: usize, j: usize| (j % k) * k + (i % k);
    let mut xyz = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            xyz.push([i as f64 * hx, j as f64 * hy, 0.0]);
        }
    }
    let mut faces = Vec::with_capacity(2 * k * k);
    for j in 0..k {
        for i in 0..k {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (xyz, vec![false; k * k], faces)
}

fn square_grid(k: usize) -> Raw {
    let h = 1.0 / k as f64;
    let m = k + 1;
    let id = |i: usize, j: usize| j * m + i;
    let mut xyz = Vec::with_capacity(m * m);
    let mut boundary = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            xyz.push([i as f64 * h, j as f64 * h, 0.0]);
            boundary.push(i == 0 || j == 0 || i == k || j == k);
        }
    }
    let mut faces = Vec::new();
    for j in 0..k {
        for i in 0..k {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (xyz, boundary, faces)
}

fn icosphere(radius: f64, k: usize) -> Raw {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base: [[f64; 3]; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let tris: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut xyz = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut faces = Vec::new();
    let kf = k as f64;
    for tri in &tris {
        let (a, b, c) = (base[tri[0]], base[tri[1]], base[tri[2]]);
        let mut local = vec![vec![0usize; k + 1]; k + 1];
        for i in 0..=k {
            for j in 0..=(k - i) {
                // Barycentric lattice point; integer weights keep shared
                // edges bit-identical between neighbouring base faces.
                let l = k - i - j;
                let p = [
                    (l as f64 * a[0] + i as f64 * b[0] + j as f64 * c[0]) / kf,
                    (l as f64 * a[1] + i as f64 * b[1] + j as f64 * c[1]) / kf,
                    (l as f64 * a[2] + i as f64 * b[2] + j as f64 * c[2]) / kf,
                ];
                let p = scale3(&normalize3(&p), radius);
                let key = [
                    (p[0] / radius * 1e9).round() as i64,
                    (p[1] / radius * 1e9).round() as i64,
                    (p[2] / radius * 1e9).round() as i64,
                ];
                let id = *index.entry(key).or_insert_with(|| {
                    xyz.push(p);
                    xyz.len() - 1
                });
                local[i][j] = id;
            }
        }
        for i in 0..k {
            for j in 0..(k - i) {
                faces.push([local[i][j], local[i + 1][j], local[i][j + 1]]);
                if i + j + 1 < k {
                    faces.push([local[i + 1][j], local[i + 1][j + 1], local[i][j + 1]]);
                }
            }
        }
    }
    let n = xyz.len();
    (xyz, vec![false; n], faces)
}

/// Concentric rings at equal geodesic spacing, each holding roughly
/// `circumference / spacing` points, stitched ring to ring.
fn polar_disk(radius: f64, rings: usize) -> Raw {
    let dr = radius / rings as f64;
    let mut xyz = vec![[0.0, 0.0, 0.0]];
    let mut boundary = vec![rings == 0];
    let mut ring_ids: Vec<Vec<(f64, usize)>> = vec![vec![(0.0, 0)]];
    for m in 1..=rings {
        let r = m as f64 * dr;
        let count = ((2.0 * PI * r.sinh() / dr).round() as usize).max(6);
        let offset = if m % 2 == 1 { 0.0 } else { PI / count as f64 };
        let rho = (0.5 * r).tanh();
        let mut ids = Vec::with_capacity(count);
        for a in 0..count {
            let theta = offset + 2.0 * PI * a as f64 / count as f64;
            xyz.push([rho * theta.cos(), rho * theta.sin(), 0.0]);
            boundary.push(m == rings);
            ids.push((theta, xyz.len() - 1));
        }
        ring_ids.push(ids);
    }
    let mut faces = Vec::new();
    let first = &ring_ids[1];
    for a in 0..first.len() {
        faces.push([0, first[a].1, first[(a + 1) % first.len()].1]);
    }
    for m in 2..=rings {
        let inner = &ring_ids[m - 1];
        let outer = &ring_ids[m];
        let (ni, no) = (inner.len(), outer.len());
        // Walk both rings by angle, always advancing the one whose next
        // point comes first.
        let angle = |ring: &Vec<(f64, usize)>, idx: usize| {
            let n = ring.len();
            ring[idx % n].0 + 2.0 * PI * (idx / n) as f64
        };
        let (mut i, mut o) = (0usize, 0usize);
        while i < ni || o < no {
            let advance_outer = if i >= ni {
                true
            } else if o >= no {
                false
            } else {
                angle(outer, o + 1) <= angle(inner, i + 1)
            };
            if advance_outer {
                faces.push([inner[i % ni].1, outer[o % no].1, outer[(o + 1) % no].1]);
                o += 1;
            } else {
                faces.push([inner[i % ni].1, outer[o % no].1, inner[(i + 1) % ni].1]);
                i += 1;
            }
        }
    }
    (xyz, boundary, faces)
}

fn side_lengths(tag: &DomainTag, xyz: &[[f64; 3]], f: &[usize; 3]) -> [f64; 3] {
    // side a is opposite corner 0, etc.
    [
        tag.distance(&xyz[f[1]], &xyz[f[2]]),
        tag.distance(&xyz[f[2]], &xyz[f[0]]),
        tag.distance(&xyz[f[0]], &xyz[f[1]]),
    ]
}

/// Cotangents of the corner angles of the Euclidean triangle with the
/// given side lengths.
fn corner_cotangents(l: [f64; 3]) -> Option<[f64; 3]> {
    let (a, b, c) = (l[0], l[1], l[2]);
    let s = 0.5 * (a + b + c);
    let area2 = s * (s - a) * (s - b) * (s - c);
    if !(area2 > 0.0) {
        return None;
    }
    let four_area = 4.0 * area2.sqrt();
    Some([
        (b * b + c * c - a * a) / four_area,
        (c * c + a * a - b * b) / four_area,
        (a * a + b * b - c * c) / four_area,
    ])
}

/// Area of the geodesic triangle with the given sides in the model.
fn model_area(tag: &DomainTag, l: [f64; 3]) -> f64 {
    match *tag {
        DomainTag::RoundSphere { radius } => {
            let [a, b, c] = l.map(|x| x / radius);
            let s = 0.5 * (a + b + c);
            let t = (0.5 * s).tan()
                * (0.5 * (s - a)).tan()
                * (0.5 * (s - b)).tan()
                * (0.5 * (s - c)).tan();
            4.0 * t.max(0.0).sqrt().atan() * radius * radius
        }
        DomainTag::HyperbolicPatch { .. } => {
            let [a, b, c] = l;
            let s = 0.5 * (a + b + c);
            let t = (0.5 * s).tanh()
                * (0.5 * (s - a)).tanh()
                * (0.5 * (s - b)).tanh()
                * (0.5 * (s - c)).tanh();
            4.0 * t.max(0.0).sqrt().atan()
        }
        _ => {
            let [a, b, c] = l;
            let s = 0.5 * (a + b + c);
            (s * (s - a) * (s - b) * (s - c)).max(0.0).sqrt()
        }
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Lawson flips towards the intrinsic Delaunay triangulation: an interior
/// edge is flipped while its two opposite angles sum to more than π.
fn delaunay_flips(tag: &DomainTag, xyz: &[[f64; 3]], mut faces: Vec<[usize; 3]>) -> Result<Vec<[usize; 3]>> {
    for _pass in 0..1000 {
        let mut owners: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for c in 0..3 {
                owners
                    .entry(edge_key(f[(c + 1) % 3], f[(c + 2) % 3]))
                    .or_default()
                    .push((fi, c));
            }
        }
        let mut touched = vec![false; faces.len()];
        let mut flipped = 0;
        for (&(a, b), own) in &owners {
            if own.len() != 2 {
                continue;
            }
            let ((f1, c1), (f2, c2)) = (own[0], own[1]);
            if touched[f1] || touched[f2] {
                continue;
            }
            let cot1 = corner_cotangents(side_lengths(tag, xyz, &faces[f1]));
            let cot2 = corner_cotangents(side_lengths(tag, xyz, &faces[f2]));
            let (Some(k1), Some(k2)) = (cot1, cot2) else {
                return Err(LabError::MeshConstruction("degenerate triangle during flips".into()));
            };
            if k1[c1] + k2[c2] >= -1e-12 {
                continue;
            }
            let p = faces[f1][c1];
            let q = faces[f2][c2];
            // keep orientation: f1 = (x, y, p) with x→y the shared edge
            let pos = |f: &[usize; 3], v: usize| f.iter().position(|&w| w == v).unwrap();
            let (x, y) = if faces[f1][(pos(&faces[f1], a) + 1) % 3] == b { (a, b) } else { (b, a) };
            faces[f1] = [x, q, p];
            faces[f2] = [q, y, p];
            touched[f1] = true;
            touched[f2] = true;
            flipped += 1;
        }
        if flipped == 0 {
            return Ok(faces);
        }
    }
    Err(LabError::MeshConstruction("Delaunay flips did not terminate".into()))
}

fn assemble(tag: DomainTag, xyz: Vec<[f64; 3]>, boundary: Vec<bool>, faces: Vec<[usize; 3]>) -> Result<MeshDomain> {
    let nv = xyz.len();
    let mut measure = vec![0.0; nv];
    let mut weights: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for f in &faces {
        let l = side_lengths(&tag, &xyz, f);
        let quality = 4.0 * 3f64.sqrt() * model_area(&DomainTag::FlatSquare, l)
            / (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
        if !(quality > 0.05) {
            return Err(LabError::MeshConstruction(format!(
                "degenerate triangle {f:?} (quality {quality:.3e})"
            )));
        }
        let cot = corner_cotangents(l)
            .ok_or_else(|| LabError::MeshConstruction(format!("degenerate triangle {f:?}")))?;
        let area = model_area(&tag, l);
        for c in 0..3 {
            measure[f[c]] += area / 3.0;
            let (a, b) = (f[(c + 1) % 3], f[(c + 2) % 3]);
            let len = l[c];
            let e = weights.entry(edge_key(a, b)).or_insert((0.0, len));
            e.0 += 0.5 * cot[c];
        }
    }
    let wmax = weights.values().map(|e| e.0.abs()).fold(0.0, f64::max);
    let mut edges = Vec::new();
    for (&(i, j), &(w, len)) in &weights {
        if w.abs() <= 1e-10 * wmax {
            continue;
        }
        if w < 0.0 {
            return Err(LabError::MeshConstruction(format!(
                "negative cotangent weight {w:.3e} on edge ({i}, {j})"
            )));
        }
        edges.push(MeshEdge { i, j, w, len });
    }
    let vertices = xyz
        .into_iter()
        .zip(boundary)
        .zip(measure)
        .map(|((xyz, boundary), measure)| MeshVertex { xyz, measure, boundary })
        .collect();
    MeshDomain::from_parts(tag, vertices, edges, faces)
}
