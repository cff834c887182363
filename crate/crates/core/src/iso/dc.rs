//! Edge roots, per-cell quadric minimization and quad assembly.

use std::collections::BTreeMap;

use nalgebra::Matrix3;

use super::{GridSpec, IsoMesh};
use crate::error::{Error, Result};
use crate::geom::{Point3, Vector3};
use crate::implicit::ImplicitField;

/// Pull of each cell vertex toward the mass point of its intersections,
/// in cell units.
pub const QEF_LAMBDA: f64 = 1e-3;

/// Bisection stops once the bracket is this fraction of the edge.
const ROOT_TOLERANCE: f64 = 1e-10;

/// A grid edge from point `start` along `axis`, packed as
/// `linear(start) * 3 + axis`.
pub(crate) type EdgeKey = u64;

pub(crate) fn edge_key(spec: &GridSpec, i: usize, j: usize, k: usize, axis: usize) -> EdgeKey {
    let n1 = (spec.resolution + 1) as u64;
    ((i as u64 * n1 + j as u64) * n1 + k as u64) * 3 + axis as u64
}

fn unpack(spec: &GridSpec, key: EdgeKey) -> ([usize; 3], usize) {
    let n1 = (spec.resolution + 1) as u64;
    let axis = (key % 3) as usize;
    let lin = key / 3;
    let k = (lin % n1) as usize;
    let j = ((lin / n1) % n1) as usize;
    let i = (lin / n1 / n1) as usize;
    ([i, j, k], axis)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeHit {
    /// Grid point the edge starts at.
    pub start: [usize; 3],
    pub axis: usize,
    pub point: Point3,
    /// Unit gradient at `point`.
    pub normal: Vector3,
    /// Whether `start` is inside (below the isovalue).
    pub start_inside: bool,
}

/// Roots on the given sign-change edges by bisection, batched over edges.
pub fn edge_roots(field: &dyn ImplicitField, spec: &GridSpec, edges: &[EdgeKey]) -> Vec<EdgeHit> {
    if edges.is_empty() {
        return Vec::new();
    }
    let iso = spec.isovalue;
    let ends: Vec<(Point3, Point3)> = edges
        .iter()
        .map(|&key| {
            let (s, axis) = unpack(spec, key);
            let mut e = s;
            e[axis] += 1;
            (spec.point(s[0], s[1], s[2]), spec.point(e[0], e[1], e[2]))
        })
        .collect();
    let starts: Vec<Point3> = ends.iter().map(|e| e.0).collect();
    let inside: Vec<bool> = field.values(&starts).iter().map(|&v| v < iso).collect();
    let mut lo = vec![0.0f64; edges.len()];
    let mut hi = vec![1.0f64; edges.len()];
    let at = |(a, b): &(Point3, Point3), t: f64| a + (b - a) * t;
    while hi[0] - lo[0] > ROOT_TOLERANCE {
        let mids: Vec<Point3> = ends.iter().zip(lo.iter().zip(&hi)).map(|(e, (l, h))| at(e, 0.5 * (l + h))).collect();
        let v = field.values(&mids);
        for i in 0..edges.len() {
            let m = 0.5 * (lo[i] + hi[i]);
            if (v[i] < iso) == inside[i] {
                lo[i] = m;
            } else {
                hi[i] = m;
            }
        }
    }
    let points: Vec<Point3> = ends.iter().zip(lo.iter().zip(&hi)).map(|(e, (l, h))| at(e, 0.5 * (l + h))).collect();
    let grads = field.gradients(&points);
    edges
        .iter()
        .enumerate()
        .map(|(i, &key)| {
            let (start, axis) = unpack(spec, key);
            let n = grads[i].norm();
            let normal = if n > 0.0 && n.is_finite() {
                grads[i] / n
            } else {
                let mut d = Vector3::zeros();
                d[axis] = if inside[i] { 1.0 } else { -1.0 };
                d
            };
            EdgeHit { start, axis, point: points[i], normal, start_inside: inside[i] }
        })
        .collect()
}

/// Minimizer of the cell's quadric in cell coordinates `[0, 1]^3`, before
/// and after clamping.
fn solve_cell(hits: &[(Vector3, Vector3)]) -> (Vector3, Vector3) {
    let mut ata = Matrix3::identity() * QEF_LAMBDA;
    let mass = hits.iter().map(|h| h.0).sum::<Vector3>() / hits.len() as f64;
    let mut atb = mass * QEF_LAMBDA;
    for (p, n) in hits {
        ata += n * n.transpose();
        atb += n * n.dot(p);
    }
    let u = ata.cholesky().map(|c| c.solve(&atb)).unwrap_or(mass);
    (u, u.map(|v| v.clamp(0.0, 1.0)))
}

/// Builds the mesh dual to the sign-change `edges`. Also returns the
/// longest mesh edge measured between unclamped cell minimizers.
pub(crate) fn contour(field: &dyn ImplicitField, spec: &GridSpec, edges: &[EdgeKey]) -> Result<(IsoMesh, f64)> {
    if edges.is_empty() {
        return Err(Error::EmptyLevelSet);
    }
    let n = spec.resolution;
    let cs = spec.cell_size();
    let hits = edge_roots(field, spec, edges);

    // Cells around each edge, counterclockwise about the edge axis.
    let around = |h: &EdgeHit| -> Option<[[usize; 3]; 4]> {
        let (b, c) = ((h.axis + 1) % 3, (h.axis + 2) % 3);
        let mut out = [[0usize; 3]; 4];
        for (q, (db, dc)) in [(1, 1), (0, 1), (0, 0), (1, 0)].into_iter().enumerate() {
            let mut cell = h.start;
            if cell[b] < db || cell[c] < dc || cell[b] - db >= n || cell[c] - dc >= n || cell[h.axis] >= n {
                return None;
            }
            cell[b] -= db;
            cell[c] -= dc;
            out[q] = cell;
        }
        Some(out)
    };

    let mut cells: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
    for (e, h) in hits.iter().enumerate() {
        let (b, c) = ((h.axis + 1) % 3, (h.axis + 2) % 3);
        for (db, dc) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let mut cell = h.start;
            if cell[b] < db || cell[c] < dc || cell[h.axis] >= n {
                continue;
            }
            cell[b] -= db;
            cell[c] -= dc;
            if cell[b] < n && cell[c] < n {
                cells.entry(cell).or_default().push(e);
            }
        }
    }

    let mut index: BTreeMap<[usize; 3], u32> = BTreeMap::new();
    let mut clamped = Vec::with_capacity(cells.len());
    let mut free = Vec::with_capacity(cells.len());
    for (cell, es) in &cells {
        let origin = spec.point(cell[0], cell[1], cell[2]);
        let local: Vec<(Vector3, Vector3)> = es
            .iter()
            .map(|&e| {
                let h = &hits[e];
                let u = (h.point - origin).component_div(&cs);
                let m = h.normal.component_mul(&cs);
                let len = m.norm();
                (u, if len > 0.0 { m / len } else { m })
            })
            .collect();
        let (u, uc) = solve_cell(&local);
        index.insert(*cell, clamped.len() as u32);
        free.push(origin + u.component_mul(&cs));
        clamped.push(origin + uc.component_mul(&cs));
    }

    let mut triangles = Vec::with_capacity(2 * hits.len());
    let mut longest = 0.0f64;
    let area = |t: &[u32; 3]| {
        let [a, b, c] = t.map(|i| clamped[i as usize]);
        (b - a).cross(&(c - a)).norm() / 2.0
    };
    for h in &hits {
        let Some(quad) = around(h) else { continue };
        let mut v = quad.map(|c| index[&c]);
        if !h.start_inside {
            v.reverse();
        }
        for q in 0..4 {
            let (a, b) = (v[q] as usize, v[(q + 1) % 4] as usize);
            longest = longest.max((free[a] - free[b]).norm());
        }
        let split_a = [[v[0], v[1], v[2]], [v[0], v[2], v[3]]];
        let split_b = [[v[0], v[1], v[3]], [v[1], v[2], v[3]]];
        let flatness = |s: &[[u32; 3]; 2]| {
            let n: Vec<Vector3> = s
                .iter()
                .map(|t| {
                    let [a, b, c] = t.map(|i| clamped[i as usize]);
                    (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vector3::zeros)
                })
                .collect();
            n[0].dot(&n[1])
        };
        let pick = if flatness(&split_b) > flatness(&split_a) { split_b } else { split_a };
        triangles.extend(pick.into_iter().filter(|t| area(t) > 1e-12));
    }
    if triangles.is_empty() {
        return Err(Error::EmptyLevelSet);
    }

    // Keep only referenced vertices, in cell order.
    let mut remap = vec![u32::MAX; clamped.len()];
    for t in &triangles {
        for &i in t {
            remap[i as usize] = 0;
        }
    }
    let mut vertices = Vec::new();
    for (i, r) in remap.iter_mut().enumerate() {
        if *r == 0 {
            *r = vertices.len() as u32;
            vertices.push(clamped[i]);
        }
    }
    for t in &mut triangles {
        *t = t.map(|i| remap[i as usize]);
    }
    let normals = field
        .gradients(&vertices)
        .into_iter()
        .map(|g| g.try_normalize(0.0).unwrap_or_else(Vector3::zeros))
        .collect();
    Ok((IsoMesh { vertices, triangles, normals, resolution: n }, longest))
}
