//! Bounding volume hierarchy over triangles for closest-point and ray
//! queries.

use crate::geom::{closest_point_on_triangle, ray_triangle, Aabb, Point3, TriMesh, Vector3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: range into `order`; inner: children at `start` and `start + 1`
    /// with `count == 0`.
    start: u32,
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[Point3; 3]>,
}

fn tri_bounds(t: &[Point3; 3]) -> Aabb {
    Aabb::from_points(t.iter())
}

impl Bvh {
    pub fn new(mesh: &TriMesh) -> Self {
        let tris: Vec<[Point3; 3]> = (0..mesh.triangles.len()).map(|t| mesh.corners(t)).collect();
        let centroids: Vec<Point3> = tris.iter().map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0)).collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..tris.len() as u32).collect(), tris };
        if !bvh.tris.is_empty() {
            bvh.nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
            bvh.build(0, 0, bvh.tris.len(), &centroids);
        }
        bvh
    }

    fn build(&mut self, node: usize, lo: usize, hi: usize, centroids: &[Point3]) {
        let mut b = Aabb::empty();
        for &t in &self.order[lo..hi] {
            b = b.merge(&tri_bounds(&self.tris[t as usize]));
        }
        self.nodes[node].bounds = b;
        if hi - lo <= LEAF_SIZE {
            self.nodes[node].start = lo as u32;
            self.nodes[node].count = (hi - lo) as u32;
            return;
        }
        let cb = Aabb::from_points(self.order[lo..hi].iter().map(|&t| &centroids[t as usize]));
        let axis = cb.extent().imax();
        let mid = (lo + hi) / 2;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
        });
        let left = self.nodes.len();
        self.nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
        self.nodes.push(Node { bounds: Aabb::empty(), start: 0, count: 0 });
        self.nodes[node].start = left as u32;
        self.nodes[node].count = 0;
        self.build(left, lo, mid, centroids);
        self.build(left + 1, mid, hi, centroids);
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Closest point on the mesh and its distance.
    pub fn closest(&self, p: &Point3) -> Option<(Point3, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (Point3::origin(), f64::INFINITY);
        let mut stack = vec![(0usize, self.nodes[0].bounds.distance_squared(p))];
        while let Some((n, d2)) = stack.pop() {
            if d2 >= best.1 {
                continue;
            }
            let node = &self.nodes[n];
            if node.count > 0 {
                for &t in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = &self.tris[t as usize];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = (q - p).norm_squared();
                    if d < best.1 {
                        best = (q, d);
                    }
                }
            } else {
                let (l, r) = (node.start as usize, node.start as usize + 1);
                let (dl, dr) = (self.nodes[l].bounds.distance_squared(p), self.nodes[r].bounds.distance_squared(p));
                // Visit the nearer child first.
                if dl < dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        Some((best.0, best.1.sqrt()))
    }

    /// Number of triangles hit by the ray `origin + t dir`, `t > 0`.
    pub fn count_hits(&self, origin: &Point3, dir: &Vector3) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut hits = 0;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !slab(&node.bounds, origin, &inv) {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = &self.tris[t as usize];
                    if ray_triangle(origin, dir, a, b, c).is_some() {
                        hits += 1;
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(node.start as usize + 1);
            }
        }
        hits
    }
}

fn slab(b: &Aabb, o: &Point3, inv: &Vector3) -> bool {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        let (mut a, mut c) = ((b.min[k] - o[k]) * inv[k], (b.max[k] - o[k]) * inv[k]);
        if a.is_nan() || c.is_nan() {
            // Ray parallel to and on the slab plane.
            if o[k] < b.min[k] || o[k] > b.max[k] {
                return false;
            }
            continue;
        }
        if a > c {
            std::mem::swap(&mut a, &mut c);
        }
        t0 = t0.max(a);
        t1 = t1.min(c);
        if t0 > t1 {
            return false;
        }
    }
    true
}
