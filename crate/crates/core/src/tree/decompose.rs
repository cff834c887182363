//! Patch decomposition: splitting a patch whose boundary mixes convex and
//! concave curves into pieces with homogeneous boundaries.

use std::collections::{BTreeMap, HashMap};

use super::maxflow::MaxFlow;
use crate::brep::BRepMesh;
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::graph::{build_patch_graph_with, EdgeLabel, GraphEdge, PatchGraph};

/// Triangle sets of the final (sub)patches and the input patch each came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecomposedPatchSet {
    pub subpatches: Vec<Vec<usize>>,
    pub parent_patch: Vec<u32>,
}

impl DecomposedPatchSet {
    pub fn from_mesh(mesh: &BRepMesh, parent_patch: Vec<u32>) -> Self {
        Self { subpatches: mesh.patch_faces(), parent_patch }
    }

    pub fn len(&self) -> usize {
        self.subpatches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subpatches.is_empty()
    }
}

/// Strategy used by tree construction to unblock a node.
pub trait PatchDecomposer {
    /// Splits `patch`, updating the full `graph` and the `parent` table.
    /// Returns the ids of the pieces; the first one reuses `patch`.
    fn decompose(&mut self, graph: &mut PatchGraph, parent: &mut Vec<u32>, patch: u32) -> Result<Vec<u32>>;
}

/// Graph-only decomposition for inputs without geometry: the patch keeps
/// its convex curves and a new vertex takes the concave ones, joined by a
/// smooth edge.
#[derive(Debug, Default, Clone, Copy)]
pub struct SymbolicDecomposer;

impl PatchDecomposer for SymbolicDecomposer {
    fn decompose(&mut self, graph: &mut PatchGraph, parent: &mut Vec<u32>, patch: u32) -> Result<Vec<u32>> {
        let convex = graph.label_degree(patch, EdgeLabel::Convex);
        let concave = graph.label_degree(patch, EdgeLabel::Concave);
        if convex == 0 || concave == 0 {
            return Err(Error::DecompositionFailure { patch: patch as usize, reason: "boundary is not mixed".into() });
        }
        let fresh = graph.vertices.iter().max().map_or(0, |m| m + 1);
        for e in &mut graph.edges {
            if e.label == EdgeLabel::Concave && e.touches(patch) {
                if e.a == patch {
                    e.a = fresh;
                } else {
                    e.b = fresh;
                }
            }
        }
        graph.edges.push(GraphEdge { a: patch, b: fresh, label: EdgeLabel::Smooth, curve: None });
        graph.vertices.push(fresh);
        parent.resize(fresh as usize + 1, u32::MAX);
        parent[fresh as usize] = parent[patch as usize];
        Ok(vec![patch, fresh])
    }
}

/// Geometric decomposition by a min-cut on the patch's dual graph. Owns
/// the current (progressively refined) mesh.
#[derive(Debug, Clone)]
pub struct MeshDecomposer {
    pub mesh: BRepMesh,
}

impl PatchDecomposer for MeshDecomposer {
    fn decompose(&mut self, graph: &mut PatchGraph, parent: &mut Vec<u32>, patch: u32) -> Result<Vec<u32>> {
        let (mesh, ids) = decompose_patch(&self.mesh, graph, patch)?;
        for &id in &ids[1..] {
            parent.resize(id as usize + 1, u32::MAX);
            parent[id as usize] = parent[patch as usize];
        }
        let par = parent.clone();
        *graph = build_patch_graph_with(&mesh, &|a, b| par[a as usize] == par[b as usize])?;
        self.mesh = mesh;
        Ok(ids)
    }
}

/// Feature label of every boundary edge of `patch`, keyed by vertex pair.
fn boundary_labels(mesh: &BRepMesh, graph: &PatchGraph, patch: u32) -> HashMap<(u32, u32), EdgeLabel> {
    let topo = mesh.edge_topology();
    let mut out = HashMap::new();
    for e in graph.edges.iter().filter(|e| e.touches(patch)) {
        if let Some(c) = e.curve.and_then(|c| graph.curves.get(c)) {
            for &me in &c.edges {
                let [a, b] = topo.edges[me];
                out.insert((a, b), e.label);
            }
        }
    }
    out
}

fn key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Splits `patch` of `mesh` so that no piece's boundary contains both
/// convex and concave segments of the original boundary. `graph` must have
/// been built from `mesh`. Returns the refined mesh and the piece ids; the
/// first piece keeps `patch`, the others get fresh ids after the existing ones.
pub fn decompose_patch(mesh: &BRepMesh, graph: &PatchGraph, patch: u32) -> Result<(BRepMesh, Vec<u32>)> {
    let fail = |reason: &str| Error::DecompositionFailure { patch: patch as usize, reason: reason.into() };
    let labels = boundary_labels(mesh, graph, patch);
    let has = |l: EdgeLabel| labels.values().any(|&x| x == l);
    if !has(EdgeLabel::Convex) || !has(EdgeLabel::Concave) {
        return Err(fail("boundary is not mixed"));
    }
    let side_label = |tri: &[u32; 3], k: usize| labels.get(&key(tri[k], tri[(k + 1) % 3])).copied();

    // Split triangles that touch both kinds of segment at their centroid.
    let mut out = mesh.clone();
    for t in 0..mesh.triangles.len() {
        if mesh.face_patch[t] != patch {
            continue;
        }
        let tri = mesh.triangles[t];
        let sides: Vec<EdgeLabel> = (0..3).filter_map(|k| side_label(&tri, k)).collect();
        if sides.contains(&EdgeLabel::Convex) && sides.contains(&EdgeLabel::Concave) {
            let [a, b, c] = mesh.corners(t);
            out.vertices.push(Point3::from((a.coords + b.coords + c.coords) / 3.0));
            let m = (out.vertices.len() - 1) as u32;
            out.triangles[t] = [tri[0], tri[1], m];
            out.triangles.push([tri[1], tri[2], m]);
            out.triangles.push([tri[2], tri[0], m]);
            for _ in 0..2 {
                out.face_patch.push(patch);
                out.planar.push(mesh.planar[t]);
            }
        }
    }

    let topo = out.edge_topology();
    let faces: Vec<usize> = (0..out.triangles.len()).filter(|&t| out.face_patch[t] == patch).collect();
    let local: HashMap<usize, usize> = faces.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let n = faces.len();
    let (src, sink) = (n, n + 1);
    let mut flow = MaxFlow::new(n + 2);
    let mut dual = Vec::new();
    let mut total_w = 0.0;
    for e in 0..topo.len() {
        let [t0, t1] = topo.faces[e];
        if let (Some(&i), Some(&j)) = (local.get(&(t0 as usize)), local.get(&(t1 as usize))) {
            let [a, b] = topo.edges[e];
            let len = (out.vertices[a as usize] - out.vertices[b as usize]).norm();
            let w = 1.0 / len.max(1e-12);
            total_w += w;
            dual.push((i, j, w));
        }
    }
    for &(i, j, w) in &dual {
        flow.add_edge(i, j, w);
    }
    let anchor = 1e3 * total_w.max(1.0);
    for (i, &t) in faces.iter().enumerate() {
        let tri = out.triangles[t];
        let sides: Vec<EdgeLabel> = (0..3).filter_map(|k| side_label(&tri, k)).collect();
        if sides.contains(&EdgeLabel::Convex) {
            flow.add_arc(src, i, anchor);
        }
        if sides.contains(&EdgeLabel::Concave) {
            flow.add_arc(i, sink, anchor);
        }
    }
    let (_, source_side) = flow.solve(src, sink);

    // Connected pieces of each label.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(i, j, _) in &dual {
        if source_side[i] == source_side[j] {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut pieces: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        pieces.entry(r).or_default().push(i);
    }
    if pieces.len() < 2 {
        return Err(fail("min-cut produced a single piece"));
    }
    let first_new = mesh.patch_count() as u32;
    let mut ids = Vec::with_capacity(pieces.len());
    for (k, members) in pieces.values().enumerate() {
        let id = if k == 0 { patch } else { first_new + k as u32 - 1 };
        ids.push(id);
        for &i in members {
            out.face_patch[faces[i]] = id;
        }
    }

    // Every piece must see only one kind of original feature segment.
    for &id in &ids {
        let (mut convex, mut concave) = (false, false);
        for (&(a, b), &l) in &labels {
            if let Some(e) = topo.find(a, b) {
                let [t0, t1] = topo.faces[e];
                if out.face_patch[t0 as usize] == id || out.face_patch[t1 as usize] == id {
                    convex |= l == EdgeLabel::Convex;
                    concave |= l == EdgeLabel::Concave;
                }
            }
        }
        if convex && concave {
            return Err(fail("a piece still touches convex and concave segments"));
        }
    }
    out.validate()?;
    Ok((out, ids))
}
