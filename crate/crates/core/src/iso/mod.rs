//! Sharp isosurfaces by dual contouring on an octree-pruned grid.

mod dc;
mod octree;

use std::fmt::Write as _;
use std::path::Path;

pub use dc::{edge_roots, EdgeHit, QEF_LAMBDA};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, TriMesh, Vector3};
use crate::implicit::ImplicitField;

/// Output edges longer than this many cell diagonals trigger re-extraction
/// at the escalation resolution.
pub const LONG_EDGE_DIAGONALS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Cells per axis, a power of two no smaller than 8.
    pub resolution: usize,
    pub bounds: Aabb,
    pub isovalue: f64,
    /// Resolution for the single retry when long edges appear.
    pub escalation: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { resolution: 256, bounds: Aabb::cube(1.0), isovalue: 0.0, escalation: Some(512) }
    }
}

impl GridSpec {
    pub fn with_resolution(resolution: usize) -> Self {
        Self { resolution, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.resolution;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid resolution {n} is not a power of two >= 8")));
        }
        if let Some(e) = self.escalation {
            if e < 8 || !e.is_power_of_two() {
                return Err(Error::InvalidArgument(format!("escalation resolution {e} is not a power of two >= 8")));
            }
        }
        let ext = self.bounds.extent();
        if !(ext.min() > 0.0) || !ext.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds are empty".into()));
        }
        if !self.isovalue.is_finite() {
            return Err(Error::InvalidArgument("isovalue is not finite".into()));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> Vector3 {
        self.bounds.extent() / self.resolution as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.cell_size().norm()
    }

    /// Grid point `(i, j, k)`; the last index lands exactly on `bounds.max`.
    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        let n = self.resolution as f64;
        let (lo, hi) = (self.bounds.min, self.bounds.max);
        let at = |a: usize, t: usize| lo[a] + (hi[a] - lo[a]) * (t as f64 / n);
        Point3::new(at(0, i), at(1, j), at(2, k))
    }
}

/// Extracted surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IsoMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    /// Normalized field gradient at each vertex.
    pub normals: Vec<Vector3>,
    /// Grid resolution the mesh came from.
    pub resolution: usize,
}

impl IsoMesh {
    pub fn to_trimesh(&self) -> TriMesh {
        TriMesh::new(self.vertices.clone(), self.triangles.clone())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Wavefront OBJ with `vn` lines.
    pub fn to_obj(&self) -> String {
        let mut s = String::with_capacity(64 * (self.vertices.len() + self.triangles.len()));
        for v in &self.vertices {
            writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
        }
        for n in &self.normals {
            writeln!(s, "vn {} {} {}", n.x, n.y, n.z).unwrap();
        }
        let with_normals = self.normals.len() == self.vertices.len() && !self.normals.is_empty();
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| i + 1);
            if with_normals {
                writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}").unwrap();
            } else {
                writeln!(s, "f {a} {b} {c}").unwrap();
            }
        }
        s
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_obj()).map_err(|e| Error::io(path, e))
    }
}

/// Reads the `v`, `vn` and `f` records of an OBJ file. Polygons are fanned.
pub fn parse_obj(text: &str) -> Result<IsoMesh> {
    let mut m = IsoMesh::default();
    for (ln, line) in text.lines().enumerate() {
        let err = |message: &str| Error::Parse { line: ln + 1, message: message.into() };
        let mut it = line.split_whitespace();
        match it.next() {
            Some(tag @ ("v" | "vn")) => {
                let c: Vec<f64> = it.take(3).map(|t| t.parse().map_err(|_| err("bad number"))).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("expected three coordinates"));
                }
                if tag == "v" {
                    m.vertices.push(Point3::new(c[0], c[1], c[2]));
                } else {
                    m.normals.push(Vector3::new(c[0], c[1], c[2]));
                }
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|t| {
                        let v: i64 = t.split('/').next().unwrap().parse().map_err(|_| err("bad index"))?;
                        let n = m.vertices.len() as i64;
                        let i = if v < 0 { n + v } else { v - 1 };
                        if i < 0 || i >= n {
                            return Err(err("index out of range"));
                        }
                        Ok(i as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face with fewer than three vertices"));
                }
                for w in 1..idx.len() - 1 {
                    m.triangles.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    if m.normals.len() != m.vertices.len() {
        m.normals.clear();
    }
    Ok(m)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<IsoMesh> {
    let path = path.as_ref();
    parse_obj(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Sign-change edges, found by the octree, with their roots and normals.
pub fn edge_intersections(field: &dyn ImplicitField, spec: &GridSpec) -> Result<Vec<EdgeHit>> {
    spec.validate()?;
    let edges = octree::sign_change_edges(field, spec);
    Ok(edge_roots(field, spec, &edges))
}

/// Single-resolution extraction over the octree.
pub fn extract_once(field: &dyn ImplicitField, spec: &GridSpec) -> Result<(IsoMesh, f64)> {
    spec.validate()?;
    let edges = octree::sign_change_edges(field, spec);
    dc::contour(field, spec, &edges)
}

/// Reference extraction that samples every grid point.
pub fn extract_dense(field: &dyn ImplicitField, spec: &GridSpec) -> Result<IsoMesh> {
    spec.validate()?;
    let edges = octree::dense_sign_change_edges(field, spec);
    Ok(dc::contour(field, spec, &edges)?.0)
}

/// Extracts the level set `spec.isovalue` of `field`. When an edge of the
/// mesh (measured between unclamped cell minimizers) exceeds
/// [`LONG_EDGE_DIAGONALS`] cell diagonals, extraction is repeated once at
/// the escalation resolution.
pub fn extract(field: &dyn ImplicitField, spec: &GridSpec) -> Result<IsoMesh> {
    let (mesh, longest) = extract_once(field, spec)?;
    let limit = LONG_EDGE_DIAGONALS * spec.cell_diagonal();
    match spec.escalation {
        Some(r) if longest > limit && r > spec.resolution => {
            log::warn!(
                "longest edge {:.3e} exceeds {:.0} cell diagonals at resolution {}; escalating to {r}",
                longest,
                LONG_EDGE_DIAGONALS,
                spec.resolution
            );
            Ok(extract_once(field, &GridSpec { resolution: r, escalation: None, ..*spec })?.0)
        }
        _ => Ok(mesh),
    }
}
