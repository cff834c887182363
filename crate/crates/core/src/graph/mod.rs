//! Feature curves and the labeled patch multigraph.

mod features;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

pub use features::{
    dihedral_angle, extract_feature_curves, feature_edges, split_hybrid, trace_feature_chains, CurveType, EdgeLabel,
    FeatureCurve, SMOOTH_TOLERANCE_DEG,
};

use crate::brep::BRepMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GraphEdge {
    pub a: u32,
    pub b: u32,
    pub label: EdgeLabel,
    /// Index into [`PatchGraph::curves`], when the edge comes from a mesh.
    pub curve: Option<usize>,
}

impl GraphEdge {
    pub fn other(&self, v: u32) -> u32 {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: u32) -> bool {
        self.a == v || self.b == v
    }
}

/// Undirected multigraph over patch ids with one labeled edge per feature
/// curve. Subgraphs keep the original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGraph {
    /// Sorted patch ids.
    pub vertices: Vec<u32>,
    pub edges: Vec<GraphEdge>,
    pub curves: Vec<FeatureCurve>,
}

impl PatchGraph {
    /// Graph on `0..n` with the given labeled edges and no curve data.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32, EdgeLabel)>) -> Self {
        let edges = edges.into_iter().map(|(a, b, label)| GraphEdge { a, b, label, curve: None }).collect();
        Self { vertices: (0..n as u32).collect(), edges, curves: Vec::new() }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn edges_of(&self, v: u32) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.touches(v))
    }

    pub fn has_label(&self, label: EdgeLabel) -> bool {
        self.edges.iter().any(|e| e.label == label)
    }

    /// Number of incident edges of `v` carrying `label`.
    pub fn label_degree(&self, v: u32, label: EdgeLabel) -> usize {
        self.edges_of(v).filter(|e| e.label == label).count()
    }

    /// Induced subgraph on `keep` (ids not in the graph are ignored).
    pub fn induced(&self, keep: &[u32]) -> PatchGraph {
        let set: BTreeSet<u32> = keep.iter().copied().filter(|&v| self.contains(v)).collect();
        PatchGraph {
            vertices: set.iter().copied().collect(),
            edges: self.edges.iter().filter(|e| set.contains(&e.a) && set.contains(&e.b)).copied().collect(),
            curves: self.curves.clone(),
        }
    }

    /// The graph with `remove` and their edges deleted.
    pub fn without(&self, remove: &[u32]) -> PatchGraph {
        let drop: BTreeSet<u32> = remove.iter().copied().collect();
        let keep: Vec<u32> = self.vertices.iter().copied().filter(|v| !drop.contains(v)).collect();
        self.induced(&keep)
    }

    /// Maximal connected subgraphs, ordered by smallest vertex id.
    pub fn components(&self) -> Vec<PatchGraph> {
        let mut adj: BTreeMap<u32, Vec<u32>> = self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for e in &self.edges {
            adj.get_mut(&e.a).unwrap().push(e.b);
            adj.get_mut(&e.b).unwrap().push(e.a);
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &s in &self.vertices {
            if !seen.insert(s) {
                continue;
            }
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &adj[&v] {
                    if seen.insert(w) {
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            out.push(self.induced(&comp));
        }
        out
    }

    /// Text adjacency list: a `vertices` line, then one `a b label` line per edge.
    pub fn dump(&self) -> String {
        let mut s = String::from("vertices");
        for v in &self.vertices {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
        for e in &self.edges {
            let _ = write!(s, "{} {} {}", e.a, e.b, e.label.name());
            if let Some(c) = e.curve.and_then(|c| self.curves.get(c)) {
                let _ = write!(s, " edges={}", c.edges.len());
                if c.hybrid_split {
                    s.push_str(" hybrid-split");
                }
            }
            s.push('\n');
        }
        s
    }
}

/// One graph vertex per patch and one labeled edge per feature curve.
pub fn build_patch_graph(mesh: &BRepMesh) -> Result<PatchGraph> {
    build_patch_graph_with(mesh, &|_, _| false)
}

/// Like [`build_patch_graph`], but curves between patches for which
/// `same_surface` holds are labeled smooth regardless of their angle.
/// Used for subpatches cut out of one original patch.
pub fn build_patch_graph_with(mesh: &BRepMesh, same_surface: &dyn Fn(u32, u32) -> bool) -> Result<PatchGraph> {
    let curves = extract_feature_curves(mesh)?;
    let mut edges = Vec::with_capacity(curves.len());
    for (i, c) in curves.iter().enumerate() {
        let label = if same_surface(c.patches[0], c.patches[1]) {
            EdgeLabel::Smooth
        } else {
            c.curve_type.label().ok_or_else(|| Error::Label("unsplit hybrid curve".into()))?
        };
        edges.push(GraphEdge { a: c.patches[0], b: c.patches[1], label, curve: Some(i) });
    }
    Ok(PatchGraph { vertices: (0..mesh.patch_count() as u32).collect(), edges, curves })
}

/// Unions patches that are joined only by smooth curves. Two groups are
/// never joined while a convex or concave curve runs between them, so the
/// merged patches keep homogeneous boundaries. New ids follow the smallest
/// original id of each group. Applying the merge twice changes nothing.
pub fn merge_smooth_patches(graph: &PatchGraph, mesh: &BRepMesh) -> Result<(PatchGraph, BRepMesh)> {
    let n = mesh.patch_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut pairs: BTreeMap<(u32, u32), bool> = BTreeMap::new();
    for e in &graph.edges {
        let key = (e.a.min(e.b), e.a.max(e.b));
        *pairs.entry(key).or_insert(true) &= e.label == EdgeLabel::Smooth;
    }
    let sharp: Vec<(u32, u32)> = pairs.iter().filter(|(_, &s)| !s).map(|(&k, _)| k).collect();
    for (&(a, b), &all_smooth) in &pairs {
        if !all_smooth {
            continue;
        }
        let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
        if ra == rb {
            continue;
        }
        let blocked = sharp.iter().any(|&(x, y)| {
            let (rx, ry) = (find(&mut parent, x as usize), find(&mut parent, y as usize));
            (rx == ra && ry == rb) || (rx == rb && ry == ra)
        });
        if !blocked {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi] = lo;
        }
    }
    let mut new_id = vec![u32::MAX; n];
    let mut next = 0;
    for p in 0..n {
        let r = find(&mut parent, p);
        if new_id[r] == u32::MAX {
            new_id[r] = next;
            next += 1;
        }
        new_id[p] = new_id[r];
    }
    let mut out = mesh.clone();
    for p in &mut out.face_patch {
        *p = new_id[*p as usize];
    }
    for r in &mut out.uv {
        r.patch = new_id[r.patch as usize];
    }
    let mut seen = BTreeSet::new();
    out.uv.retain(|r| seen.insert((r.vertex, r.patch)));
    if next < n as u32 {
        log::info!("merged {n} patches into {next} across smooth curves");
    }
    let g = build_patch_graph(&out)?;
    Ok((g, out))
}
