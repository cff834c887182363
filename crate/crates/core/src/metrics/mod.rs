//! Conversion quality: surface distances, normal and feature errors, and
//! field accuracy against a closed ground-truth mesh.

mod bvh;
mod features;

pub use bvh::Bvh;
pub use features::{
    edge_dihedrals, feature_metrics, feature_metrics_of, sample_features, FeatureSampleSet, FEATURE_SPACING,
    FEATURE_THRESHOLD_DEG,
};

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{angle_deg, triangle_area, triangle_normal, Point3, PointIndex, TriMesh, Vector3};
use crate::implicit::ImplicitField;

pub const CSV_HEADER: &str = "model,CD,HD,NAE,FCD,FAE,DE,IoU";

/// Added to `|F_g|` in the distance error.
pub const DE_DELTA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub surface_samples: usize,
    pub volume_samples: usize,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { surface_samples: 50_000, volume_samples: 1 << 17, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub cd: f64,
    pub hd: f64,
    pub nae: f64,
    /// Absent when either mesh has no sharp edges.
    pub fcd: Option<f64>,
    pub fae: Option<f64>,
    pub de: f64,
    pub iou: f64,
}

impl MetricsReport {
    /// One CSV line matching [`CSV_HEADER`]; absent values are written `NA`.
    pub fn csv_row(&self, model: &str) -> String {
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
        format!(
            "{model},{},{},{},{},{},{},{}",
            self.cd,
            self.hd,
            self.nae,
            opt(self.fcd),
            opt(self.fae),
            self.de,
            self.iou
        )
    }
}

/// Nearest-neighbor distances from `from` into `to`, plus the mean of
/// `pair(i, j)` over the nearest pairs.
pub(crate) struct OneSided {
    pub mean: f64,
    pub max: f64,
}

pub(crate) fn one_sided(from: &[Point3], to: &[Point3], pair: impl Fn(usize, usize) -> f64 + Sync) -> Result<(OneSided, f64)> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptySet);
    }
    let index = PointIndex::new(to);
    let rows: Vec<(f64, f64)> = from
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (j, d2) = index.nearest(p);
            (d2.sqrt(), pair(i, j))
        })
        .collect();
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let max = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let pair_mean = rows.iter().map(|r| r.1).sum::<f64>() / n;
    Ok((OneSided { mean, max }, pair_mean))
}

/// Two-sided Chamfer distance (mean of the two one-sided means) and
/// Hausdorff distance.
pub fn chamfer_hausdorff(pe: &[Point3], pg: &[Point3]) -> Result<(f64, f64)> {
    let (a, _) = one_sided(pe, pg, |_, _| 0.0)?;
    let (b, _) = one_sided(pg, pe, |_, _| 0.0)?;
    Ok((0.5 * (a.mean + b.mean), a.max.max(b.max)))
}

/// Two-sided mean angle in degrees between each normal and the normal of
/// the nearest point on the other side.
pub fn normal_angle_error(pe: &[Point3], ne: &[Vector3], pg: &[Point3], ng: &[Vector3]) -> Result<f64> {
    let (_, a) = one_sided(pe, pg, |i, j| angle_deg(&ne[i], &ng[j]))?;
    let (_, b) = one_sided(pg, pe, |i, j| angle_deg(&ng[i], &ne[j]))?;
    Ok(0.5 * (a + b))
}

/// Area-uniform surface samples with the unit normal of their triangle.
pub fn sample_mesh(mesh: &TriMesh, count: usize, seed: u64) -> Result<(Vec<Point3>, Vec<Vector3>)> {
    let areas: Vec<f64> = (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            triangle_area(&a, &b, &c)
        })
        .collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| Error::EmptySet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let t = pick.sample(&mut rng);
        let [a, b, c] = mesh.corners(t);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        points.push(Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2)));
        normals.push(triangle_normal(&a, &b, &c));
    }
    Ok((points, normals))
}

/// Every directed edge appears once and its reverse appears once.
pub fn check_closed(mesh: &TriMesh) -> Result<()> {
    if mesh.triangles.is_empty() {
        return Err(Error::OpenGroundTruth("no triangles".into()));
    }
    let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(3 * mesh.triangles.len());
    for t in &mesh.triangles {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    for (&(a, b), &n) in &directed {
        if n != 1 || directed.get(&(b, a)) != Some(&1) {
            return Err(Error::OpenGroundTruth(format!("edge ({a}, {b}) is not shared by exactly two faces")));
        }
    }
    Ok(())
}

/// Signed distance to a closed mesh: closest point for the magnitude, the
/// majority of three axis-ray parities for the sign (negative inside).
pub struct MeshSdf {
    bvh: Bvh,
}

impl MeshSdf {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        check_closed(mesh)?;
        Ok(Self { bvh: Bvh::new(mesh) })
    }

    pub fn inside(&self, p: &Point3) -> bool {
        let votes = [Vector3::x(), Vector3::y(), Vector3::z()]
            .iter()
            .filter(|d| self.bvh.count_hits(p, d) % 2 == 1)
            .count();
        votes >= 2
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        self.bvh.closest(p).map_or(f64::INFINITY, |c| c.1)
    }
}

impl ImplicitField for MeshSdf {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        points
            .par_iter()
            .map(|p| {
                let d = self.distance(p);
                if self.inside(p) {
                    -d
                } else {
                    d
                }
            })
            .collect()
    }
}

/// Fixed-seed uniform samples in `[-1, 1]^3`.
pub fn volume_samples(count: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Per-point relative error `|F_g - f| / (|F_g| + δ)`.
pub fn distance_error_terms(truth: &[f64], field: &[f64]) -> Vec<f64> {
    truth.iter().zip(field).map(|(g, f)| (g - f).abs() / (g.abs() + DE_DELTA)).collect()
}

pub fn distance_error(field: &dyn ImplicitField, truth: &MeshSdf, points: &[Point3]) -> f64 {
    let terms = distance_error_terms(&truth.values(points), &field.values(points));
    terms.iter().sum::<f64>() / terms.len() as f64
}

/// Intersection over union of `{f < 0}` and the inside of the truth mesh.
pub fn occupancy_iou(field: &dyn ImplicitField, truth: &MeshSdf, points: &[Point3]) -> f64 {
    let f = field.values(points);
    let inside: Vec<bool> = points.par_iter().map(|p| truth.inside(p)).collect();
    iou_of(f.iter().map(|&v| v < 0.0), inside.into_iter())
}

pub fn iou_of(a: impl Iterator<Item = bool>, b: impl Iterator<Item = bool>) -> f64 {
    let (mut both, mut either) = (0usize, 0usize);
    for (x, y) in a.zip(b) {
        both += usize::from(x && y);
        either += usize::from(x || y);
    }
    if either == 0 {
        1.0
    } else {
        both as f64 / either as f64
    }
}

/// All metrics of an extracted mesh and its field against the truth mesh,
/// in the frame of `truth`.
pub fn evaluate(field: &dyn ImplicitField, extracted: &TriMesh, truth: &TriMesh, cfg: &MetricsConfig) -> Result<MetricsReport> {
    let sdf = MeshSdf::new(truth)?;
    let (pe, ne) = sample_mesh(extracted, cfg.surface_samples, cfg.seed)?;
    let (pg, ng) = sample_mesh(truth, cfg.surface_samples, cfg.seed.wrapping_add(1))?;
    let (cd, hd) = chamfer_hausdorff(&pe, &pg)?;
    let nae = normal_angle_error(&pe, &ne, &pg, &ng)?;
    let (fcd, fae) = match feature_metrics(extracted, truth) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(Error::NoFeatures(side)) => {
            log::info!("no sharp features on the {side}; FCD and FAE are absent");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let g = volume_samples(cfg.volume_samples, cfg.seed.wrapping_add(2));
    let de = distance_error(field, &sdf, &g);
    let iou = occupancy_iou(field, &sdf, &g);
    Ok(MetricsReport { cd, hd, nae, fcd, fae, de, iou })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::implicit::{BoxField, FnField, Shifted};

    fn cube_mesh(min: [f64; 3], max: [f64; 3]) -> TriMesh {
        fixtures::cube(Point3::from(min), Point3::from(max)).to_trimesh()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        volume_samples(n, seed)
    }

    #[test]
    fn chamfer_hand_examples() {
        let p = random_points(100, 1);
        assert_eq!(chamfer_hausdorff(&p, &p).unwrap(), (0.0, 0.0));
        let (cd, hd) = chamfer_hausdorff(&[Point3::origin()], &[Point3::new(1.0, 0.0, 0.0)]).unwrap();
        assert_eq!((cd, hd), (1.0, 1.0));
        assert!(matches!(chamfer_hausdorff(&[], &p), Err(Error::EmptySet)));
    }

    #[test]
    fn chamfer_matches_brute_force() {
        let a = random_points(1000, 2);
        let b = random_points(1000, 3);
        let brute = |x: &[Point3], y: &[Point3]| -> (f64, f64) {
            let d: Vec<f64> = x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).collect();
            (d.iter().sum::<f64>() / d.len() as f64, d.iter().cloned().fold(0.0, f64::max))
        };
        let (ab, ba) = (brute(&a, &b), brute(&b, &a));
        let (cd, hd) = chamfer_hausdorff(&a, &b).unwrap();
        assert!((cd - 0.5 * (ab.0 + ba.0)).abs() < 1e-12);
        assert!((hd - ab.1.max(ba.1)).abs() < 1e-12);
        assert!(hd >= cd);
    }

    #[test]
    fn normal_error_hand_examples() {
        let p = random_points(50, 4);
        let n: Vec<Vector3> = p.iter().map(|q| q.coords.normalize()).collect();
        let flipped: Vec<Vector3> = n.iter().map(|v| -v).collect();
        let rotated: Vec<Vector3> = n.iter().map(|v| v.cross(&Vector3::new(0.3, -0.5, 0.8)).normalize()).collect();
        assert_eq!(normal_angle_error(&p, &n, &p, &n).unwrap(), 0.0);
        assert!((normal_angle_error(&p, &n, &p, &flipped).unwrap() - 180.0).abs() < 1e-6);
        assert!((normal_angle_error(&p, &n, &p, &rotated).unwrap() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn closed_check() {
        let m = cube_mesh([0.0; 3], [1.0; 3]);
        assert!(check_closed(&m).is_ok());
        let mut open = m.clone();
        open.triangles.pop();
        assert!(matches!(MeshSdf::new(&open), Err(Error::OpenGroundTruth(_))));
    }

    #[test]
    fn exact_sdf_scores_perfectly() {
        let m = cube_mesh([-0.5; 3], [0.5; 3]);
        let sdf = MeshSdf::new(&m).unwrap();
        let g = volume_samples(4096, 5);
        assert_eq!(distance_error(&sdf, &sdf, &g), 0.0);
        assert_eq!(occupancy_iou(&sdf, &sdf, &g), 1.0);
        // Inside the cube the box field is the exact distance.
        let inner: Vec<Point3> = g.iter().filter(|p| p.coords.amax() < 0.5).copied().collect();
        assert!(distance_error(&BoxField::cube(0.5), &sdf, &inner) < 1e-12);
    }

    #[test]
    fn distance_error_pointwise() {
        let m = cube_mesh([-0.5; 3], [0.5; 3]);
        let sdf = MeshSdf::new(&m).unwrap();
        let shifted = Shifted { inner: &sdf, shift: -0.1 };
        let probes = [
            ([0.0, 0.0, 0.0], -0.5),
            ([0.25, 0.0, 0.0], -0.25),
            ([0.0, -0.4, 0.1], -0.1),
            ([0.7, 0.0, 0.0], 0.2),
            ([0.0, 0.0, -0.9], 0.4),
            ([0.8, 0.9, 0.0], 0.5),
            ([0.6, 0.6, 0.6], 0.03f64.sqrt()),
            ([0.45, 0.3, -0.2], -0.05),
            ([-0.1, 0.2, 0.35], -0.15),
            ([1.0, -1.0, 1.0], 0.75f64.sqrt()),
        ];
        let pts: Vec<Point3> = probes.iter().map(|p| Point3::from(p.0)).collect();
        let terms = distance_error_terms(&sdf.values(&pts), &shifted.values(&pts));
        for ((_, g), t) in probes.iter().zip(&terms) {
            let by_hand = 0.1 / (g.abs() + DE_DELTA);
            assert!((t - by_hand).abs() < 1e-9 * by_hand, "{t} vs {by_hand}");
        }
        // On the surface δ keeps the term finite.
        let on = [Point3::new(0.5, 0.0, 0.0)];
        let t = distance_error_terms(&sdf.values(&on), &shifted.values(&on))[0];
        assert!(t.is_finite() && t > 1e7);
    }

    #[test]
    fn iou_of_cube_pairs() {
        let a = cube_mesh([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]);
        let sdf = MeshSdf::new(&a).unwrap();
        let g = volume_samples(1 << 17, 6);
        let half = BoxField::from_corners(Point3::new(0.0, -0.5, -0.5), Point3::new(1.0, 0.5, 0.5));
        assert!((occupancy_iou(&half, &sdf, &g) - 1.0 / 3.0).abs() < 0.01);
        let far = FnField(|p: &Point3| BoxField::cube(0.2).value(&(p - Vector3::new(0.8, 0.8, 0.8))));
        assert_eq!(occupancy_iou(&far, &sdf, &g), 0.0);
    }

    #[test]
    fn chamfer_grows_with_noise() {
        let m = fixtures::grid_box(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5), 8).to_trimesh();
        let (pg, _) = sample_mesh(&m, 5000, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dirs: Vec<Vector3> = m.vertices.iter().map(|_| Vector3::new(rng.random(), rng.random(), rng.random()) - Vector3::repeat(0.5)).collect();
        let mut last = -1.0;
        for eps in [0.0, 0.01, 0.02, 0.04, 0.08] {
            let noisy = TriMesh::new(m.vertices.iter().zip(&dirs).map(|(v, d)| v + d * eps).collect(), m.triangles.clone());
            let (pe, _) = sample_mesh(&noisy, 5000, 2).unwrap();
            let (cd, _) = chamfer_hausdorff(&pe, &pg).unwrap();
            assert!(cd > last, "{eps}: {cd} <= {last}");
            last = cd;
        }
    }

    #[test]
    fn report_row() {
        let r = MetricsReport { cd: 0.5, hd: 1.0, nae: 2.0, fcd: None, fae: Some(3.0), de: 0.25, iou: 1.0 };
        assert_eq!(r.csv_row("cube"), "cube,0.5,1,2,NA,3,0.25,1");
        assert_eq!(CSV_HEADER.split(',').count(), r.csv_row("x").split(',').count());
    }

    #[test]
    fn evaluate_against_itself() {
        let m = cube_mesh([-0.5; 3], [0.5; 3]);
        let sdf = MeshSdf::new(&m).unwrap();
        let cfg = MetricsConfig { surface_samples: 4000, volume_samples: 4096, seed: 1 };
        let r = evaluate(&sdf, &m, &m, &cfg).unwrap();
        assert_eq!((r.fcd, r.fae), (Some(0.0), Some(0.0)));
        // Independent samples: nearest partners sometimes sit across an edge.
        assert!(r.cd < 0.02 && r.nae < 5.0, "{r:?}");
        assert_eq!((r.de, r.iou), (0.0, 1.0));
    }
}
