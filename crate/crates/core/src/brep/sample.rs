//! Area-uniform surface sampling and the binary sample-set container.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! offset 0   4 bytes  magic "NHSS"
//! offset 4   u32      version (1)
//! offset 8   u64      record count N
//! offset 16  u64      sampling seed
//! offset 24  N records of 60 bytes: x y z nx ny nz sigma (f64) patch (u32)
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BRepMesh, NORMALIZED_HALF_EXTENT};
use crate::error::{Error, Result};
use crate::geom::{Point3, PointIndex, Vector3};

/// Minimum number of samples owned by every patch.
pub const MIN_SAMPLES_PER_PATCH: usize = 50;

const MAGIC: &[u8; 4] = b"NHSS";
const VERSION: u32 = 1;
const RECORD_BYTES: usize = 7 * 8 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Point3>,
    pub normals: Vec<Vector3>,
    pub patch_of: Vec<u32>,
    /// Distance to the nearest other sample.
    pub sigma: Vec<f64>,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn patch_count(&self) -> usize {
        self.patch_of.iter().map(|&p| p as usize + 1).max().unwrap_or(0)
    }

    /// Sample indices of each patch.
    pub fn by_patch(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.patch_count()];
        for (i, &p) in self.patch_of.iter().enumerate() {
            out[p as usize].push(i);
        }
        out
    }

    /// Checks unit normals, per-patch floor and the normalized box.
    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if self.normals.len() != n || self.patch_of.len() != n || self.sigma.len() != n {
            return Err(Error::InvalidArgument("sample arrays have different lengths".into()));
        }
        if let Some(i) = self.normals.iter().position(|v| (v.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::InvalidArgument(format!("sample {i} has a non-unit normal")));
        }
        let lim = NORMALIZED_HALF_EXTENT + 1e-9;
        if let Some(i) = self.points.iter().position(|p| p.iter().any(|c| c.abs() > lim)) {
            return Err(Error::InvalidArgument(format!("sample {i} lies outside the normalized box")));
        }
        for (p, idx) in self.by_patch().iter().enumerate() {
            if idx.len() < MIN_SAMPLES_PER_PATCH {
                return Err(Error::Quota { total: idx.len(), patches: p + 1 });
            }
        }
        Ok(())
    }

    /// Recomputes `sigma` as the distance to the nearest other sample.
    pub fn recompute_sigma(&mut self) {
        self.sigma = nearest_other_distance(&self.points);
    }

    /// Noisy copy: each point moves along its normal by U[-amplitude, amplitude]
    /// and each normal is tilted by up to `max_angle_deg` about a random
    /// tangent axis.
    pub fn perturbed(&self, amplitude: f64, max_angle_deg: f64, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for (p, n) in out.points.iter_mut().zip(out.normals.iter_mut()) {
            let d = if amplitude > 0.0 { rng.random_range(-amplitude..=amplitude) } else { 0.0 };
            *p += *n * d;
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let angle = if max_angle_deg > 0.0 { rng.random_range(-max_angle_deg..=max_angle_deg) } else { 0.0 };
            let (t1, t2) = tangent_frame(n);
            let axis = t1 * phi.cos() + t2 * phi.sin();
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle.to_radians());
            *n = (rot * *n).normalize();
        }
        out.recompute_sigma();
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(24 + RECORD_BYTES * self.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        for i in 0..self.len() {
            let (p, n) = (self.points[i], self.normals[i]);
            for v in [p.x, p.y, p.z, n.x, n.y, n.z, self.sigma[i]] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.extend_from_slice(&self.patch_of[i].to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(r: &mut impl Read) -> Result<SampleSet> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
        let bad = |m: &str| Error::Parse { line: 0, message: format!("sample set: {m}") };
        if bytes.len() < 24 || &bytes[0..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if bytes.len() != 24 + n * RECORD_BYTES {
            return Err(bad("truncated or oversized body"));
        }
        let mut s = SampleSet {
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            patch_of: Vec::with_capacity(n),
            sigma: Vec::with_capacity(n),
            seed,
        };
        for rec in bytes[24..].chunks_exact(RECORD_BYTES) {
            let f = |k: usize| f64::from_le_bytes(rec[8 * k..8 * k + 8].try_into().unwrap());
            s.points.push(Point3::new(f(0), f(1), f(2)));
            s.normals.push(Vector3::new(f(3), f(4), f(5)));
            s.sigma.push(f(6));
            s.patch_of.push(u32::from_le_bytes(rec[56..60].try_into().unwrap()));
        }
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SampleSet> {
        let path = path.as_ref();
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut f)
    }
}

fn tangent_frame(n: &Vector3) -> (Vector3, Vector3) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = n.cross(&helper).normalize();
    (t1, n.cross(&t1))
}

fn nearest_other_distance(points: &[Point3]) -> Vec<f64> {
    if points.len() < 2 {
        return vec![0.0; points.len()];
    }
    let index = PointIndex::new(points);
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .nearest_k(p, 2)
                .into_iter()
                .find(|&(j, _)| j != i)
                .map_or(0.0, |(_, d2)| d2.sqrt())
        })
        .collect()
}

/// Vertex normals of curved faces, kept separate per patch so that normals
/// never blend across a feature curve. Each corner contributes
/// `e1 x e2 / (|e1|^2 |e2|^2)` (Max 1999), which is exact for vertices on a
/// sphere.
fn curved_vertex_normals(mesh: &BRepMesh) -> HashMap<(u32, u32), Vector3> {
    let mut acc: HashMap<(u32, u32), Vector3> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.planar[t] {
            continue;
        }
        let p = mesh.corners(t);
        for k in 0..3 {
            let e1 = p[(k + 1) % 3] - p[k];
            let e2 = p[(k + 2) % 3] - p[k];
            let w = e1.norm_squared() * e2.norm_squared();
            if w > 0.0 {
                *acc.entry((tri[k], mesh.face_patch[t])).or_insert_with(Vector3::zeros) += e1.cross(&e2) / w;
            }
        }
    }
    for n in acc.values_mut() {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    acc
}

/// One sample: source face, position, unit normal.
pub(crate) type RawSample = (usize, Point3, Vector3);

/// Draws `count` area-uniform samples from `faces`.
pub(crate) fn sample_faces(
    mesh: &BRepMesh,
    faces: &[usize],
    count: usize,
    vnormals: &HashMap<(u32, u32), Vector3>,
    rng: &mut impl Rng,
) -> Vec<RawSample> {
    let mut cdf = Vec::with_capacity(faces.len());
    let mut acc = 0.0;
    for &t in faces {
        acc += mesh.face_area(t);
        cdf.push(acc);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= r).min(faces.len() - 1);
        let t = faces[k];
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let [a, b, c] = mesh.corners(t);
        let p = Point3::from(a.coords * bary[0] + b.coords * bary[1] + c.coords * bary[2]);
        let face_n = mesh.face_normal(t);
        let n = if mesh.planar[t] {
            face_n
        } else {
            let patch = mesh.face_patch[t];
            let tri = mesh.triangles[t];
            let mut n = Vector3::zeros();
            for k in 0..3 {
                n += vnormals.get(&(tri[k], patch)).copied().unwrap_or(face_n) * bary[k];
            }
            let len = n.norm();
            if len > 1e-12 {
                n / len
            } else {
                face_n
            }
        };
        out.push((t, p, n));
    }
    out
}

/// Samples a normalized mesh: every patch receives `max(ceil(total / L), 50)`
/// area-uniform points.
pub fn sample_surface(mesh: &BRepMesh, total: usize, seed: u64) -> Result<SampleSet> {
    let l = mesh.patch_count();
    if l == 0 || total < MIN_SAMPLES_PER_PATCH * l {
        return Err(Error::Quota { total, patches: l });
    }
    let quota = total.div_ceil(l).max(MIN_SAMPLES_PER_PATCH);
    let vnormals = curved_vertex_normals(mesh);
    let patch_faces = mesh.patch_faces();
    let per_patch: Vec<Vec<RawSample>> = patch_faces
        .par_iter()
        .enumerate()
        .map(|(p, faces)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            sample_faces(mesh, faces, quota, &vnormals, &mut rng)
        })
        .collect();

    let mut set = SampleSet {
        points: Vec::with_capacity(quota * l),
        normals: Vec::with_capacity(quota * l),
        patch_of: Vec::with_capacity(quota * l),
        sigma: Vec::new(),
        seed,
    };
    for (p, samples) in per_patch.into_iter().enumerate() {
        for (_, x, n) in samples {
            set.points.push(x);
            set.normals.push(n);
            set.patch_of.push(p as u32);
        }
    }
    set.recompute_sigma();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn unit_cube() -> BRepMesh {
        fixtures::cube(Point3::new(-0.9, -0.9, -0.9), Point3::new(0.9, 0.9, 0.9))
    }

    #[test]
    fn cube_quota_and_axis_normals() {
        let s = sample_surface(&unit_cube(), 50_000, 1).unwrap();
        assert_eq!(s.len(), 6 * 8334);
        for idx in s.by_patch() {
            assert_eq!(idx.len(), 8334);
        }
        for n in &s.normals {
            let big = n.iter().filter(|c| (c.abs() - 1.0).abs() < 1e-12).count();
            let zero = n.iter().filter(|c| c.abs() < 1e-12).count();
            assert_eq!((big, zero), (1, 2));
        }
        s.validate().unwrap();
    }

    #[test]
    fn too_few_samples_is_a_quota_error() {
        assert!(matches!(sample_surface(&unit_cube(), 100, 0), Err(Error::Quota { total: 100, patches: 6 })));
    }

    #[test]
    fn sphere_normals_are_radial() {
        let m = fixtures::uv_sphere(0.8, 48, 24, false);
        let s = sample_surface(&m, 5000, 3).unwrap();
        let worst = s.points.iter().zip(&s.normals).map(|(p, n)| (p.coords.normalize() - n).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn equal_halves_receive_equal_shares() {
        let m = unit_cube();
        let faces = &m.patch_faces()[5];
        assert_eq!(faces.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = sample_faces(&m, faces, 10_000, &HashMap::new(), &mut rng);
        let first = samples.iter().filter(|s| s.0 == faces[0]).count() as f64;
        let second = 10_000.0 - first;
        assert!((first - second).abs() / first.max(second) < 0.05, "{first} vs {second}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_surface(&unit_cube(), 600, 9).unwrap();
        let b = sample_surface(&unit_cube(), 600, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_surface(&unit_cube(), 600, 10).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn sigma_positive_and_correct() {
        let s = sample_surface(&unit_cube(), 600, 2).unwrap();
        assert!(s.sigma.iter().all(|&d| d > 0.0));
        for i in (0..s.len()).step_by(37) {
            let brute = (0..s.len())
                .filter(|&j| j != i)
                .map(|j| (s.points[j] - s.points[i]).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((brute - s.sigma[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_round_trip() {
        let s = sample_surface(&unit_cube(), 300, 4).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"NHSS");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), s.len() as u64);
        let back = SampleSet::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
        buf.pop();
        assert!(SampleSet::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn perturbation_bounds() {
        let s = sample_surface(&unit_cube(), 600, 5).unwrap();
        let noisy = s.perturbed(0.018, 3.0, 6);
        for i in 0..s.len() {
            let d = noisy.points[i] - s.points[i];
            assert!(d.norm() <= 0.018 + 1e-15);
            assert!(d.cross(&s.normals[i]).norm() < 1e-12);
            let ang = crate::geom::angle_deg(&noisy.normals[i], &s.normals[i]);
            assert!(ang <= 3.0 + 1e-9);
            assert!((noisy.normals[i].norm() - 1.0).abs() < 1e-12);
        }
    }
}
