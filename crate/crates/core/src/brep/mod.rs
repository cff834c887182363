//! Labeled boundary meshes: validation, edge topology and normalization.
//!
//! A [`BRepMesh`] is the discrete stand-in for a B-Rep solid. Every triangle
//! carries the id of the surface patch it belongs to, and a flag telling
//! whether that patch is planar (flat shading) or curved (interpolated
//! vertex normals).

mod format;
mod sample;

use std::collections::{HashMap, HashSet};

pub use format::{load_brep, parse_brep, save_brep, write_brep};
pub use sample::{sample_surface, SampleSet};

use crate::error::{Error, Result};
use crate::geom::{triangle_area, triangle_normal, Aabb, Point3, TriMesh, Vector3};

/// Parametric coordinate record carried through from the input file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvRecord {
    pub vertex: u32,
    pub patch: u32,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BRepMesh {
    pub vertices: Vec<Point3>,
    /// Outward-oriented triangles.
    pub triangles: Vec<[u32; 3]>,
    pub face_patch: Vec<u32>,
    /// Per-triangle planar flag; curved faces get interpolated normals.
    pub planar: Vec<bool>,
    pub uv: Vec<UvRecord>,
}

impl BRepMesh {
    /// Builds and validates a mesh whose faces are all planar.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>, face_patch: Vec<u32>) -> Result<Self> {
        let planar = vec![true; triangles.len()];
        let mesh = Self { vertices, triangles, face_patch, planar, uv: Vec::new() };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn patch_count(&self) -> usize {
        self.face_patch.iter().map(|&p| p as usize + 1).max().unwrap_or(0)
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_normal(&self, t: usize) -> Vector3 {
        let [a, b, c] = self.corners(t);
        triangle_normal(&a, &b, &c)
    }

    pub fn face_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        triangle_area(&a, &b, &c)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Triangles of each patch, indexed by patch id.
    pub fn patch_faces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.patch_count()];
        for (t, &p) in self.face_patch.iter().enumerate() {
            out[p as usize].push(t);
        }
        out
    }

    pub fn to_trimesh(&self) -> TriMesh {
        TriMesh::new(self.vertices.clone(), self.triangles.clone())
    }

    /// Checks closedness, manifoldness, orientation and patch labels.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if self.face_patch.len() != self.triangles.len() || self.planar.len() != self.triangles.len() {
            return Err(Error::Label("per-face arrays do not match the triangle count".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Topology(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {t} repeats a vertex")));
            }
        }
        if !self.vertices.iter().all(|p| p.iter().all(|c| c.is_finite())) {
            return Err(Error::DegenerateGeometry("non-finite vertex coordinate".into()));
        }

        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if let Some(prev) = directed.insert(e, t) {
                    let (lo, hi) = (e.0.min(e.1), e.0.max(e.1));
                    return Err(Error::Topology(format!(
                        "inconsistent orientation or non-manifold edge ({lo}, {hi}) shared by triangles {prev} and {t}"
                    )));
                }
            }
        }
        let mut boundary: Vec<(u32, u32)> = directed
            .keys()
            .filter(|&&(a, b)| !directed.contains_key(&(b, a)))
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        if !boundary.is_empty() {
            boundary.sort_unstable();
            let (a, b) = boundary[0];
            return Err(Error::Topology(format!(
                "open mesh: boundary edge ({a}, {b}) has a single incident triangle"
            )));
        }

        let l = self.patch_count();
        let mut used = vec![false; l];
        for &p in &self.face_patch {
            used[p as usize] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::Label(format!("patch id {missing} is never used (ids must be 0..{l})")));
        }
        self.check_patch_connectivity(&directed)?;

        let mut seen = HashSet::new();
        for r in &self.uv {
            if r.vertex >= n || r.patch as usize >= l {
                return Err(Error::Label(format!("uv record for vertex {} patch {} is out of range", r.vertex, r.patch)));
            }
            if !seen.insert((r.vertex, r.patch)) {
                return Err(Error::Label(format!("duplicated uv record for vertex {} patch {}", r.vertex, r.patch)));
            }
        }
        Ok(())
    }

    fn check_patch_connectivity(&self, directed: &HashMap<(u32, u32), usize>) -> Result<()> {
        let nt = self.triangles.len();
        let mut parent: Vec<usize> = (0..nt).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (&(a, b), &t) in directed {
            if a < b {
                let u = directed[&(b, a)];
                if self.face_patch[t] == self.face_patch[u] {
                    let (ra, rb) = (find(&mut parent, t), find(&mut parent, u));
                    parent[ra] = rb;
                }
            }
        }
        let mut root_of_patch: Vec<Option<usize>> = vec![None; self.patch_count()];
        for t in 0..nt {
            let r = find(&mut parent, t);
            let p = self.face_patch[t] as usize;
            match root_of_patch[p] {
                None => root_of_patch[p] = Some(r),
                Some(r0) if r0 != r => {
                    return Err(Error::Label(format!("patch id {p} is duplicated across disconnected regions")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Edge table of a validated mesh.
    pub fn edge_topology(&self) -> EdgeTopology {
        EdgeTopology::new(&self.triangles)
    }

    /// Applies a similarity transform to every vertex.
    pub fn transformed(&self, t: &Similarity) -> BRepMesh {
        let mut out = self.clone();
        for p in &mut out.vertices {
            *p = t.apply(p);
        }
        out
    }
}

/// Undirected edges of a closed, consistently oriented triangle mesh.
#[derive(Debug, Clone)]
pub struct EdgeTopology {
    /// Vertex pair of each edge, `lo < hi`.
    pub edges: Vec<[u32; 2]>,
    /// `[t0, t1]`: `t0` traverses the edge as `lo -> hi`, `t1` as `hi -> lo`.
    pub faces: Vec<[u32; 2]>,
    /// Edge id of each triangle side `k`, the side running from corner `k` to `k + 1`.
    pub tri_edges: Vec<[u32; 3]>,
    index: HashMap<(u32, u32), u32>,
}

impl EdgeTopology {
    pub fn new(triangles: &[[u32; 3]]) -> Self {
        let mut edges = Vec::new();
        let mut faces: Vec<[u32; 2]> = Vec::new();
        let mut index = HashMap::new();
        let mut tri_edges = vec![[u32::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    faces.push([u32::MAX; 2]);
                    (edges.len() - 1) as u32
                });
                let slot = if a < b { 0 } else { 1 };
                faces[id as usize][slot] = t as u32;
                tri_edges[t][k] = id;
            }
        }
        Self { edges, faces, tri_edges, index }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn find(&self, a: u32, b: u32) -> Option<usize> {
        self.index.get(&(a.min(b), a.max(b))).map(|&e| e as usize)
    }

    pub fn is_interior(&self, e: usize) -> bool {
        self.faces[e].iter().all(|&t| t != u32::MAX)
    }
}

/// `p -> scale * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub translation: Vector3,
}

impl Similarity {
    pub fn identity() -> Self {
        Self { scale: 1.0, translation: Vector3::zeros() }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(p.coords * self.scale + self.translation)
    }

    pub fn inverse(&self) -> Similarity {
        Similarity { scale: 1.0 / self.scale, translation: -self.translation / self.scale }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.translation == Vector3::zeros()
    }
}

/// Half-extent of the normalized bounding box.
pub const NORMALIZED_HALF_EXTENT: f64 = 0.9;

/// Centers the mesh at the origin and scales its largest half-extent to 0.9.
pub fn normalize(mesh: &BRepMesh) -> Result<(BRepMesh, Similarity)> {
    if mesh.vertices.is_empty() {
        return Err(Error::DegenerateGeometry("mesh has no vertices".into()));
    }
    let b = mesh.bounds();
    let half = b.extent().max() / 2.0;
    if !(half > 0.0) {
        return Err(Error::DegenerateGeometry("bounding box has zero extent".into()));
    }
    let scale = NORMALIZED_HALF_EXTENT / half;
    let t = Similarity { scale, translation: -b.center().coords * scale };
    Ok((mesh.transformed(&t), t))
}
