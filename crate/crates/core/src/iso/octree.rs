//! Sign-change edge search, dense and octree-pruned.

use super::dc::{edge_key, EdgeKey};
use super::GridSpec;
use crate::geom::Point3;
use crate::implicit::ImplicitField;

/// Blocks at or below this many cells per side are sampled densely.
const LEAF_CELLS: usize = 8;
/// Lattice points per block side used for the pruning test.
const PROBES: usize = 5;
/// Points per side of the lattice that estimates the Lipschitz constant.
const LIPSCHITZ_LATTICE: usize = 17;
/// Safety factor applied to the largest sampled gradient norm.
const LIPSCHITZ_SAFETY: f64 = 1.5;
/// Points evaluated per field call.
const BATCH: usize = 1 << 16;

/// Scans the `(s+1)^3` values of a block stored `i`-major and appends its
/// sign-change edges.
fn scan_block(spec: &GridSpec, origin: [usize; 3], s: usize, values: &[f64], out: &mut Vec<EdgeKey>) {
    let iso = spec.isovalue;
    let m = s + 1;
    let at = |i: usize, j: usize, k: usize| values[(i * m + j) * m + k] < iso;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let inside = at(i, j, k);
                let nb = [(i + 1, j, k), (i, j + 1, k), (i, j, k + 1)];
                for (axis, &(a, b, c)) in nb.iter().enumerate() {
                    if a < m && b < m && c < m && at(a, b, c) != inside {
                        out.push(edge_key(spec, origin[0] + i, origin[1] + j, origin[2] + k, axis));
                    }
                }
            }
        }
    }
}

fn block_points(spec: &GridSpec, origin: [usize; 3], s: usize, step: usize, out: &mut Vec<Point3>) {
    for i in (0..=s).step_by(step) {
        for j in (0..=s).step_by(step) {
            for k in (0..=s).step_by(step) {
                out.push(spec.point(origin[0] + i, origin[1] + j, origin[2] + k));
            }
        }
    }
}

fn values_batched(field: &dyn ImplicitField, points: &[Point3]) -> Vec<f64> {
    points.chunks(BATCH).flat_map(|c| field.values(c)).collect()
}

/// Every sign-change edge of the grid, sampling all grid points.
pub(crate) fn dense_sign_change_edges(field: &dyn ImplicitField, spec: &GridSpec) -> Vec<EdgeKey> {
    let n = spec.resolution;
    let mut pts = Vec::with_capacity((n + 1).pow(3));
    block_points(spec, [0, 0, 0], n, 1, &mut pts);
    let values = values_batched(field, &pts);
    let mut out = Vec::new();
    scan_block(spec, [0, 0, 0], n, &values, &mut out);
    out.sort_unstable();
    out
}

fn lipschitz_estimate(field: &dyn ImplicitField, spec: &GridSpec) -> f64 {
    let m = LIPSCHITZ_LATTICE - 1;
    let (lo, ext) = (spec.bounds.min, spec.bounds.extent());
    let mut pts = Vec::with_capacity(LIPSCHITZ_LATTICE.pow(3));
    for i in 0..=m {
        for j in 0..=m {
            for k in 0..=m {
                let t = |a: usize, v: usize| lo[a] + ext[a] * v as f64 / m as f64;
                pts.push(Point3::new(t(0, i), t(1, j), t(2, k)));
            }
        }
    }
    let l = field.gradients(&pts).iter().map(|g| g.norm()).filter(|v| v.is_finite()).fold(0.0, f64::max);
    LIPSCHITZ_SAFETY * l
}

/// Sign-change edges found by recursive subdivision. A block is dropped
/// when every probe value is farther from the isovalue than the estimated
/// Lipschitz constant times (half a probe-lattice diagonal + one cell
/// diagonal).
pub(crate) fn sign_change_edges(field: &dyn ImplicitField, spec: &GridSpec) -> Vec<EdgeKey> {
    let n = spec.resolution;
    if n <= LEAF_CELLS {
        return dense_sign_change_edges(field, spec);
    }
    let lip = lipschitz_estimate(field, spec);
    let diag = spec.cell_diagonal();
    let mut level = vec![[0usize; 3]];
    let mut s = n;
    while s > LEAF_CELLS {
        let step = s / (PROBES - 1);
        let mut pts = Vec::with_capacity(level.len() * PROBES.pow(3));
        for &o in &level {
            block_points(spec, o, s, step, &mut pts);
        }
        let values = values_batched(field, &pts);
        let margin = lip * (step as f64 * diag / 2.0 + diag);
        let half = s / 2;
        let mut next = Vec::new();
        for (b, o) in level.iter().enumerate() {
            let probe = &values[b * PROBES.pow(3)..(b + 1) * PROBES.pow(3)];
            let near = probe.iter().map(|v| (v - spec.isovalue).abs()).fold(f64::INFINITY, f64::min);
            if near > margin {
                continue;
            }
            for d in 0..8 {
                next.push([o[0] + half * (d >> 2 & 1), o[1] + half * (d >> 1 & 1), o[2] + half * (d & 1)]);
            }
        }
        level = next;
        s = half;
    }
    let per_block = (s + 1).pow(3);
    let blocks_per_batch = (BATCH / per_block).max(1);
    let mut out = Vec::new();
    for group in level.chunks(blocks_per_batch) {
        let mut pts = Vec::with_capacity(group.len() * per_block);
        for &o in group {
            block_points(spec, o, s, 1, &mut pts);
        }
        let values = field.values(&pts);
        for (b, &o) in group.iter().enumerate() {
            scan_block(spec, o, s, &values[b * per_block..(b + 1) * per_block], &mut out);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
