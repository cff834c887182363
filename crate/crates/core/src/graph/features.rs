//! Dihedral angles and feature curves.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::brep::{BRepMesh, EdgeTopology};
use crate::error::{Error, Result};

/// Half-width of the band around 180 degrees treated as smooth.
pub const SMOOTH_TOLERANCE_DEG: f64 = 5.0;

/// Label of a graph edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeLabel {
    Convex,
    Concave,
    Smooth,
}

impl EdgeLabel {
    pub fn name(self) -> &'static str {
        match self {
            EdgeLabel::Convex => "convex",
            EdgeLabel::Concave => "concave",
            EdgeLabel::Smooth => "smooth",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "convex" => Some(EdgeLabel::Convex),
            "concave" => Some(EdgeLabel::Concave),
            "smooth" => Some(EdgeLabel::Smooth),
            _ => None,
        }
    }

    /// Label of a single edge with interior dihedral `gamma` (degrees).
    pub fn of_angle(gamma: f64) -> Self {
        if gamma < 180.0 - SMOOTH_TOLERANCE_DEG {
            EdgeLabel::Convex
        } else if gamma > 180.0 + SMOOTH_TOLERANCE_DEG {
            EdgeLabel::Concave
        } else {
            EdgeLabel::Smooth
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveType {
    Convex,
    Concave,
    Smooth,
    Hybrid,
}

impl CurveType {
    pub fn of_angles(angles: &[f64]) -> Self {
        let convex = angles.iter().any(|&g| EdgeLabel::of_angle(g) == EdgeLabel::Convex);
        let concave = angles.iter().any(|&g| EdgeLabel::of_angle(g) == EdgeLabel::Concave);
        match (convex, concave) {
            (true, true) => CurveType::Hybrid,
            (true, false) => CurveType::Convex,
            (false, true) => CurveType::Concave,
            (false, false) => CurveType::Smooth,
        }
    }

    /// Graph label; `None` for hybrid curves, which must be split first.
    pub fn label(self) -> Option<EdgeLabel> {
        match self {
            CurveType::Convex => Some(EdgeLabel::Convex),
            CurveType::Concave => Some(EdgeLabel::Concave),
            CurveType::Smooth => Some(EdgeLabel::Smooth),
            CurveType::Hybrid => None,
        }
    }
}

/// A chain of mesh edges shared by two patches.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCurve {
    /// The two patches, smaller id first.
    pub patches: [u32; 2],
    /// Mesh edge ids in chain order.
    pub edges: Vec<usize>,
    /// Chain vertices; one more than `edges` for open chains, equal for loops.
    pub vertices: Vec<u32>,
    /// Interior dihedral angle of each edge, degrees.
    pub angles: Vec<f64>,
    pub curve_type: CurveType,
    pub closed: bool,
    /// Set on the pieces of a curve that was hybrid before splitting.
    pub hybrid_split: bool,
}

/// Interior dihedral angle at mesh edge `e`, in degrees: 90 on a cube edge,
/// 180 across a flat seam, 270 at a reflex step.
pub fn dihedral_angle(mesh: &BRepMesh, topo: &EdgeTopology, e: usize) -> Result<f64> {
    if e >= topo.len() || !topo.is_interior(e) {
        return Err(Error::BoundaryEdge(e));
    }
    let [t0, t1] = topo.faces[e].map(|t| t as usize);
    let n0 = mesh.face_normal(t0);
    let n1 = mesh.face_normal(t1);
    let phi = n0.dot(&n1).clamp(-1.0, 1.0).acos().to_degrees();
    let [lo, hi] = topo.edges[e];
    let apex = mesh.triangles[t1].into_iter().find(|&v| v != lo && v != hi).expect("triangle has three vertices");
    let a = mesh.vertices[lo as usize];
    let below = n0.dot(&(mesh.vertices[apex as usize] - a)) <= 0.0;
    Ok(if below { 180.0 - phi } else { 180.0 + phi })
}

/// Mesh edges whose incident triangles carry different patch ids.
pub fn feature_edges(mesh: &BRepMesh, topo: &EdgeTopology) -> Vec<usize> {
    (0..topo.len())
        .filter(|&e| {
            let [t0, t1] = topo.faces[e];
            t0 != u32::MAX && t1 != u32::MAX && mesh.face_patch[t0 as usize] != mesh.face_patch[t1 as usize]
        })
        .collect()
}

fn edge_patches(mesh: &BRepMesh, topo: &EdgeTopology, e: usize) -> [u32; 2] {
    let [t0, t1] = topo.faces[e];
    let (a, b) = (mesh.face_patch[t0 as usize], mesh.face_patch[t1 as usize]);
    [a.min(b), a.max(b)]
}

/// Traces feature chains without hybrid splitting. Chains break at feature
/// corners (vertices touching three or more patches) and wherever the chain
/// branches or ends.
pub fn trace_feature_chains(mesh: &BRepMesh) -> Result<Vec<FeatureCurve>> {
    let topo = mesh.edge_topology();
    let feats = feature_edges(mesh, &topo);
    let angles: Vec<f64> = feats.par_iter().map(|&e| dihedral_angle(mesh, &topo, e)).collect::<Result<_>>()?;
    let angle_of: BTreeMap<usize, f64> = feats.iter().copied().zip(angles).collect();

    let mut vertex_patches: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            vertex_patches[v as usize].insert(mesh.face_patch[t]);
        }
    }

    let mut groups: BTreeMap<[u32; 2], Vec<usize>> = BTreeMap::new();
    for &e in &feats {
        groups.entry(edge_patches(mesh, &topo, e)).or_default().push(e);
    }

    let mut curves = Vec::new();
    for (pair, edges) in groups {
        let mut adj: BTreeMap<u32, Vec<(u32, usize)>> = BTreeMap::new();
        for &e in &edges {
            let [a, b] = topo.edges[e];
            adj.entry(a).or_default().push((b, e));
            adj.entry(b).or_default().push((a, e));
        }
        for list in adj.values_mut() {
            list.sort_unstable();
        }
        let is_break = |v: u32| vertex_patches[v as usize].len() >= 3 || adj[&v].len() != 2;
        let mut used: BTreeSet<usize> = BTreeSet::new();
        let walk = |start: u32, first: (u32, usize), used: &mut BTreeSet<usize>| {
            let mut vertices = vec![start];
            let mut chain = Vec::new();
            let (mut v, mut e) = first;
            loop {
                used.insert(e);
                chain.push(e);
                if v == start {
                    break (vertices, chain, true);
                }
                vertices.push(v);
                if is_break(v) {
                    break (vertices, chain, false);
                }
                match adj[&v].iter().find(|&&(_, e2)| !used.contains(&e2)) {
                    Some(&(w, e2)) => {
                        v = w;
                        e = e2;
                    }
                    None => break (vertices, chain, false),
                }
            }
        };
        let starts: Vec<u32> = adj.keys().copied().filter(|&v| is_break(v)).collect();
        let mut traced = Vec::new();
        for &s in &starts {
            for &(w, e) in &adj[&s] {
                if !used.contains(&e) {
                    traced.push(walk(s, (w, e), &mut used));
                }
            }
        }
        let rest: Vec<u32> = adj.keys().copied().collect();
        for s in rest {
            while let Some(&(w, e)) = adj[&s].iter().find(|&&(_, e)| !used.contains(&e)) {
                traced.push(walk(s, (w, e), &mut used));
            }
        }
        for (vertices, chain, closed) in traced {
            let angles: Vec<f64> = chain.iter().map(|e| angle_of[e]).collect();
            curves.push(FeatureCurve {
                patches: pair,
                curve_type: CurveType::of_angles(&angles),
                edges: chain,
                vertices,
                angles,
                closed,
                hybrid_split: false,
            });
        }
    }
    Ok(curves)
}

fn sign_of(gamma: f64) -> i8 {
    match EdgeLabel::of_angle(gamma) {
        EdgeLabel::Convex => 1,
        EdgeLabel::Concave => -1,
        EdgeLabel::Smooth => 0,
    }
}

/// Splits a hybrid curve into maximal convex and concave pieces. Smooth
/// edges join the run before them (leading smooth edges of an open chain
/// join the first run). Returns the curve unchanged when it is not hybrid.
pub fn split_hybrid(curve: &FeatureCurve) -> Vec<FeatureCurve> {
    if curve.curve_type != CurveType::Hybrid {
        return vec![curve.clone()];
    }
    let n = curve.edges.len();
    let signs: Vec<i8> = curve.angles.iter().map(|&g| sign_of(g)).collect();
    let first_nonzero = signs.iter().position(|&s| s != 0).expect("hybrid curve has feature edges");
    let mut eff = vec![0i8; n];
    if curve.closed {
        let last_nonzero = signs.iter().rposition(|&s| s != 0).unwrap();
        let mut cur = signs[last_nonzero];
        for i in 0..n {
            if signs[i] != 0 {
                cur = signs[i];
            }
            eff[i] = cur;
        }
    } else {
        let mut cur = signs[first_nonzero];
        for i in 0..n {
            if signs[i] != 0 {
                cur = signs[i];
            }
            eff[i] = cur;
        }
    }
    // Loops are rotated to start at a run boundary.
    let offset = if curve.closed { (0..n).find(|&i| eff[i] != eff[(i + n - 1) % n]).unwrap() } else { 0 };
    let mut pieces = Vec::new();
    let mut k = 0;
    while k < n {
        let s = eff[(offset + k) % n];
        let mut end = k;
        while end < n && eff[(offset + end) % n] == s {
            end += 1;
        }
        let idx: Vec<usize> = (k..end).map(|i| (offset + i) % n).collect();
        let nv = curve.vertices.len();
        let mut vertices: Vec<u32> = idx.iter().map(|&i| curve.vertices[i]).collect();
        vertices.push(curve.vertices[(idx[idx.len() - 1] + 1) % nv]);
        pieces.push(FeatureCurve {
            patches: curve.patches,
            edges: idx.iter().map(|&i| curve.edges[i]).collect(),
            angles: idx.iter().map(|&i| curve.angles[i]).collect(),
            vertices,
            curve_type: if s > 0 { CurveType::Convex } else { CurveType::Concave },
            closed: false,
            hybrid_split: true,
        });
        k = end;
    }
    pieces
}

/// Feature curves of a mesh, with hybrid curves already split so that
/// every returned curve is convex, concave or smooth.
pub fn extract_feature_curves(mesh: &BRepMesh) -> Result<Vec<FeatureCurve>> {
    let chains = trace_feature_chains(mesh)?;
    let mut out = Vec::with_capacity(chains.len());
    for c in &chains {
        let pieces = split_hybrid(c);
        if pieces.len() > 1 {
            log::info!("hybrid feature curve between patches {} and {} split into {} pieces", c.patches[0], c.patches[1], pieces.len());
        }
        out.extend(pieces);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::Point3;

    fn unit() -> BRepMesh {
        fixtures::cube(Point3::origin(), Point3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn cube_edges_are_right_angles() {
        let m = unit();
        let topo = m.edge_topology();
        for e in feature_edges(&m, &topo) {
            assert!((dihedral_angle(&m, &topo, e).unwrap() - 90.0).abs() < 1e-9);
        }
        // The face diagonals are flat.
        let diag = (0..topo.len()).find(|&e| !feature_edges(&m, &topo).contains(&e)).unwrap();
        assert!((dihedral_angle(&m, &topo, diag).unwrap() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn l_bracket_inner_edge_is_reflex() {
        let m = fixtures::extrude(&fixtures::l_profile(1.0), 0.0, 1.0, 1);
        let topo = m.edge_topology();
        let mut reflex = 0;
        for e in feature_edges(&m, &topo) {
            let g = dihedral_angle(&m, &topo, e).unwrap();
            if (g - 270.0).abs() < 1e-9 {
                reflex += 1;
                // The reflex edge joins side patches 2 and 3 at (1, 1).
                let [a, b] = topo.edges[e];
                assert_eq!((m.vertices[a as usize].x, m.vertices[a as usize].y), (1.0, 1.0));
                assert_eq!((m.vertices[b as usize].x, m.vertices[b as usize].y), (1.0, 1.0));
            } else {
                assert!((g - 90.0).abs() < 1e-9, "{g}");
            }
        }
        assert_eq!(reflex, 1);
    }

    #[test]
    fn out_of_range_edge_is_rejected() {
        let m = unit();
        let topo = m.edge_topology();
        assert!(matches!(dihedral_angle(&m, &topo, 999), Err(Error::BoundaryEdge(999))));
    }

    #[test]
    fn cube_has_twelve_convex_curves() {
        let curves = extract_feature_curves(&unit()).unwrap();
        assert_eq!(curves.len(), 12);
        assert!(curves.iter().all(|c| c.curve_type == CurveType::Convex && c.edges.len() == 1 && !c.closed));
    }

    #[test]
    fn cylinder_has_two_convex_loops() {
        let m = fixtures::extrude(&fixtures::circle_profile(1.0, 48), 0.0, 1.0, 3);
        let curves = extract_feature_curves(&m).unwrap();
        assert_eq!(curves.len(), 2);
        for c in &curves {
            assert!(c.closed);
            assert_eq!(c.edges.len(), 48);
            assert_eq!(c.curve_type, CurveType::Convex);
        }
    }

    #[test]
    fn chains_are_connected_paths() {
        let m = fixtures::extrude(&fixtures::star_profile(1.0, 0.4).subdivided(3), 0.0, 0.5, 3);
        let topo = m.edge_topology();
        let curves = extract_feature_curves(&m).unwrap();
        let mut covered = BTreeSet::new();
        for c in &curves {
            let nv = if c.closed { c.edges.len() } else { c.edges.len() + 1 };
            assert_eq!(c.vertices.len(), nv);
            for (i, &e) in c.edges.iter().enumerate() {
                let [a, b] = topo.edges[e];
                let (u, v) = (c.vertices[i], c.vertices[(i + 1) % c.vertices.len()]);
                assert!((a, b) == (u.min(v), u.max(v)));
                assert!(covered.insert(e), "edge in two curves");
            }
        }
        assert_eq!(covered.len(), feature_edges(&m, &topo).len());
    }

    #[test]
    fn wave_seam_alternates() {
        let m = fixtures::wave_pair(12, 0.08);
        let raw = trace_feature_chains(&m).unwrap();
        let seam: Vec<_> = raw.iter().filter(|c| c.patches == [5, 6]).collect();
        assert_eq!(seam.len(), 1);
        assert_eq!(seam[0].curve_type, CurveType::Hybrid);
        let curves = extract_feature_curves(&m).unwrap();
        let pieces: Vec<_> = curves.iter().filter(|c| c.patches == [5, 6]).collect();
        assert!(pieces.len() >= 2);
        for w in pieces.windows(2) {
            assert_ne!(w[0].curve_type, w[1].curve_type);
        }
        assert!(pieces.iter().all(|c| c.hybrid_split));
        let total: usize = pieces.iter().map(|c| c.edges.len()).sum();
        assert_eq!(total, seam[0].edges.len());
    }

    #[test]
    fn loop_split_is_rotated_to_a_boundary() {
        let base = FeatureCurve {
            patches: [0, 1],
            edges: (0..6).collect(),
            vertices: (0..6).collect(),
            angles: vec![90.0, 180.0, 270.0, 270.0, 90.0, 90.0],
            curve_type: CurveType::Hybrid,
            closed: true,
            hybrid_split: false,
        };
        let pieces = split_hybrid(&base);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].edges, vec![2, 3]);
        assert_eq!(pieces[0].vertices, vec![2, 3, 4]);
        assert_eq!(pieces[1].edges, vec![4, 5, 0, 1]);
        assert_eq!(pieces[1].vertices, vec![4, 5, 0, 1, 2]);
        let open = FeatureCurve { closed: false, vertices: (0..7).collect(), ..base };
        let pieces = split_hybrid(&open);
        let spans: Vec<_> = pieces.iter().map(|p| (p.edges.clone(), p.vertices.clone())).collect();
        assert_eq!(
            spans,
            vec![(vec![0, 1], vec![0, 1, 2]), (vec![2, 3], vec![2, 3, 4]), (vec![4, 5], vec![4, 5, 6])]
        );
    }
}
