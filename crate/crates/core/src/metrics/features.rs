//! Sharp feature edges of a triangle mesh, resampled at fixed spacing.

use crate::brep::EdgeTopology;
use crate::error::{Error, Result};
use crate::geom::{triangle_normal, Point3, TriMesh};

/// Dihedral deviation from flat, in degrees, that makes an edge sharp.
pub const FEATURE_THRESHOLD_DEG: f64 = 30.0;
/// Largest gap between consecutive samples along a feature edge.
pub const FEATURE_SPACING: f64 = 0.004;

/// Points on sharp edges with the interior dihedral angle of their edge.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSampleSet {
    pub points: Vec<Point3>,
    pub angles: Vec<f64>,
}

impl FeatureSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Interior dihedral angle in degrees at every interior edge of an
/// oriented mesh (90 on a cube edge, 270 at a reflex step); `None` on
/// boundary edges.
pub fn edge_dihedrals(mesh: &TriMesh, topo: &EdgeTopology) -> Vec<Option<f64>> {
    (0..topo.len())
        .map(|e| {
            let [t0, t1] = topo.faces[e];
            if t0 == u32::MAX || t1 == u32::MAX {
                return None;
            }
            let [a0, b0, c0] = mesh.corners(t0 as usize);
            let [a1, b1, c1] = mesh.corners(t1 as usize);
            let (n0, n1) = (triangle_normal(&a0, &b0, &c0), triangle_normal(&a1, &b1, &c1));
            if n0.norm() == 0.0 || n1.norm() == 0.0 {
                return None;
            }
            let phi = n0.dot(&n1).clamp(-1.0, 1.0).acos().to_degrees();
            let [lo, hi] = topo.edges[e];
            let apex = mesh.triangles[t1 as usize].into_iter().find(|&v| v != lo && v != hi)?;
            let below = n0.dot(&(mesh.vertices[apex as usize] - mesh.vertices[lo as usize])) <= 0.0;
            Some(if below { 180.0 - phi } else { 180.0 + phi })
        })
        .collect()
}

/// Samples every edge whose dihedral deviates from 180 by at least
/// `threshold` degrees: an edge of length `l` gets `ceil(l / spacing)`
/// samples at the midpoints of equal sub-segments.
pub fn sample_features(mesh: &TriMesh, threshold: f64, spacing: f64) -> FeatureSampleSet {
    let topo = EdgeTopology::new(&mesh.triangles);
    let mut out = FeatureSampleSet::default();
    for (e, angle) in edge_dihedrals(mesh, &topo).into_iter().enumerate() {
        let Some(angle) = angle else { continue };
        if (180.0 - angle).abs() < threshold {
            continue;
        }
        let [a, b] = topo.edges[e].map(|v| mesh.vertices[v as usize]);
        let k = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
        for s in 0..k {
            out.points.push(a + (b - a) * ((s as f64 + 0.5) / k as f64));
            out.angles.push(angle);
        }
    }
    out
}

/// Feature Chamfer distance and mean dihedral error over nearest pairs,
/// both two-sided. `NoFeatures` names the side without sharp edges.
pub fn feature_metrics(extracted: &TriMesh, truth: &TriMesh) -> Result<(f64, f64)> {
    let fe = sample_features(extracted, FEATURE_THRESHOLD_DEG, FEATURE_SPACING);
    let fg = sample_features(truth, FEATURE_THRESHOLD_DEG, FEATURE_SPACING);
    if fe.is_empty() {
        return Err(Error::NoFeatures("extracted mesh"));
    }
    if fg.is_empty() {
        return Err(Error::NoFeatures("ground-truth mesh"));
    }
    feature_metrics_of(&fe, &fg)
}

pub fn feature_metrics_of(fe: &FeatureSampleSet, fg: &FeatureSampleSet) -> Result<(f64, f64)> {
    let (de, ae) = super::one_sided(&fe.points, &fg.points, |i, j| (fe.angles[i] - fg.angles[j]).abs())?;
    let (dg, ag) = super::one_sided(&fg.points, &fe.points, |i, j| (fg.angles[i] - fe.angles[j]).abs())?;
    Ok((0.5 * (de.mean + dg.mean), 0.5 * (ae + ag)))
}
