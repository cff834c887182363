//! Procedural labeled meshes with known geometry, and exact occupancy tests
//! for the solids they bound.
//!
//! Every builder returns a validated [`BRepMesh`]; they panic only on
//! programmer error (for example a profile whose fan triangulation folds).

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use crate::brep::BRepMesh;
use crate::geom::{Point3, Vector3};

/// Incremental mesh assembly with exact vertex deduplication.
#[derive(Default)]
pub struct MeshBuilder {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    face_patch: Vec<u32>,
    planar: Vec<bool>,
    index: HashMap<[u64; 3], u32>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `p`, reusing a bit-identical earlier vertex.
    pub fn vertex(&mut self, p: Point3) -> u32 {
        // -0.0 and 0.0 must map to the same vertex.
        let key = [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits);
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }

    pub fn tri(&mut self, a: u32, b: u32, c: u32, patch: u32, planar: bool) {
        self.triangles.push([a, b, c]);
        self.face_patch.push(patch);
        self.planar.push(planar);
    }

    /// Counter-clockwise quad `abcd`, split along `ac`.
    pub fn quad(&mut self, a: u32, b: u32, c: u32, d: u32, patch: u32, planar: bool) {
        self.tri(a, b, c, patch, planar);
        self.tri(a, c, d, patch, planar);
    }

    /// Appends another mesh with its patch ids shifted by `patch_offset`.
    pub fn append(&mut self, other: &BRepMesh, patch_offset: u32) {
        let ids: Vec<u32> = other.vertices.iter().map(|p| self.vertex(*p)).collect();
        for (t, tri) in other.triangles.iter().enumerate() {
            self.tri(
                ids[tri[0] as usize],
                ids[tri[1] as usize],
                ids[tri[2] as usize],
                other.face_patch[t] + patch_offset,
                other.planar[t],
            );
        }
    }

    pub fn build(self) -> BRepMesh {
        let mesh = BRepMesh {
            vertices: self.vertices,
            triangles: self.triangles,
            face_patch: self.face_patch,
            planar: self.planar,
            uv: Vec::new(),
        };
        if let Err(e) = mesh.validate() {
            panic!("fixture mesh is invalid: {e}");
        }
        mesh
    }
}

/// Signed volume of a closed mesh; positive for outward orientation.
pub fn signed_volume(mesh: &BRepMesh) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
        })
        .sum()
}

/// Two meshes in one file; the second one's patch ids follow the first's.
pub fn merge(a: &BRepMesh, b: &BRepMesh) -> BRepMesh {
    let mut mb = MeshBuilder::new();
    mb.append(a, 0);
    mb.append(b, a.patch_count() as u32);
    mb.build()
}

fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / n as f64
    }
}

/// Box faces tessellated as `n x n` quad grids. Face ids: `2 * axis + side`
/// (0 = -x, 1 = +x, 2 = -y, 3 = +y, 4 = -z, 5 = +z). `place` maps lattice
/// indices to positions and `patch` may relabel individual quads.
fn grid_box_with(
    n: usize,
    place: &dyn Fn([usize; 3]) -> Point3,
    patch: &dyn Fn(usize, usize, usize) -> u32,
) -> BRepMesh {
    let mut mb = MeshBuilder::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let face = 2 * axis + side;
            let at = |i: usize, j: usize| {
                let mut l = [0; 3];
                l[axis] = side * n;
                l[u] = i;
                l[v] = j;
                place(l)
            };
            for i in 0..n {
                for j in 0..n {
                    let a = mb.vertex(at(i, j));
                    let b = mb.vertex(at(i + 1, j));
                    let c = mb.vertex(at(i + 1, j + 1));
                    let d = mb.vertex(at(i, j + 1));
                    let id = patch(face, i, j);
                    if side == 1 {
                        mb.quad(a, b, c, d, id, true);
                    } else {
                        mb.quad(a, d, c, b, id, true);
                    }
                }
            }
        }
    }
    mb.build()
}

/// Axis-aligned box with `n x n` quads per face, patch ids as in [`cube`].
pub fn grid_box(min: Point3, max: Point3, n: usize) -> BRepMesh {
    assert!(n >= 1);
    let place = |l: [usize; 3]| Point3::new(lerp(min.x, max.x, l[0], n), lerp(min.y, max.y, l[1], n), lerp(min.z, max.z, l[2], n));
    grid_box_with(n, &place, &|face, _, _| face as u32)
}

/// 12-triangle box; patch ids 0 = -x, 1 = +x, 2 = -y, 3 = +y, 4 = -z, 5 = +z.
pub fn cube(min: Point3, max: Point3) -> BRepMesh {
    grid_box(min, max, 1)
}

/// Cube `[-1, 1]^3` whose edges and corners are rounded with radius `r`;
/// every dihedral stays close to 180 degrees for fine `n`.
pub fn rounded_cube(r: f64, n: usize) -> BRepMesh {
    let inner = 1.0 - r;
    let place = |l: [usize; 3]| {
        let v = Point3::new(lerp(-1.0, 1.0, l[0], n), lerp(-1.0, 1.0, l[1], n), lerp(-1.0, 1.0, l[2], n));
        let c = v.map(|x| x.clamp(-inner, inner));
        c + (v - c).normalize() * r
    };
    grid_box_with(n, &place, &|face, _, _| face as u32)
}

/// Box `[-1, 1]^3` whose top face is split at `y = 0` into patches 5
/// (`y < 0`) and 6 (`y > 0`). Interior seam vertices are lifted by
/// `+amplitude` in the outer thirds and lowered in the middle third, so the
/// seam runs ridge, valley, ridge.
pub fn wave_pair(n: usize, amplitude: f64) -> BRepMesh {
    assert!(n % 2 == 0 && n >= 6);
    let half = n / 2;
    let place = |l: [usize; 3]| {
        let mut p = Point3::new(lerp(-1.0, 1.0, l[0], n), lerp(-1.0, 1.0, l[1], n), lerp(-1.0, 1.0, l[2], n));
        if l[2] == n && l[1] == half && l[0] > 0 && l[0] < n {
            let third = 3 * l[0] / n;
            p.z += if third == 1 { -amplitude } else { amplitude };
        }
        p
    };
    // On the +z face the quad grid runs over (u, v) = (x, y).
    let patch = |face: usize, _i: usize, j: usize| {
        if face == 5 && j >= half {
            6
        } else {
            face as u32
        }
    };
    grid_box_with(n, &place, &patch)
}

/// Closed planar profile for [`extrude`]: edge `k` runs from `points[k]` to
/// `points[k + 1]` and belongs to side patch `edge_patch[k]`.
#[derive(Debug, Clone)]
pub struct Profile {
    /// Counter-clockwise outline.
    pub points: Vec<[f64; 2]>,
    pub edge_patch: Vec<u32>,
    pub edge_planar: Vec<bool>,
    /// A point from which the whole outline is visible; caps are fans around it.
    pub center: [f64; 2],
}

impl Profile {
    /// Straight-sided polygon, one patch per edge in order.
    pub fn polygon(points: &[[f64; 2]], center: [f64; 2]) -> Self {
        let n = points.len();
        Self { points: points.to_vec(), edge_patch: (0..n as u32).collect(), edge_planar: vec![true; n], center }
    }

    /// Splits every edge into `k` equal pieces of the same patch.
    pub fn subdivided(&self, k: usize) -> Self {
        let n = self.points.len();
        let mut out = Self { points: Vec::new(), edge_patch: Vec::new(), edge_planar: Vec::new(), center: self.center };
        for e in 0..n {
            let (a, b) = (self.points[e], self.points[(e + 1) % n]);
            for s in 0..k {
                let t = s as f64 / k as f64;
                out.points.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]);
                out.edge_patch.push(self.edge_patch[e]);
                out.edge_planar.push(self.edge_planar[e]);
            }
        }
        out
    }

    pub fn side_patch_count(&self) -> u32 {
        self.edge_patch.iter().max().map_or(0, |m| m + 1)
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.points.len();
        let mut inside = false;
        for k in 0..n {
            let [x0, y0] = self.points[k];
            let [x1, y1] = self.points[(k + 1) % n];
            if (y0 > y) != (y1 > y) && x < x0 + (y - y0) * (x1 - x0) / (y1 - y0) {
                inside = !inside;
            }
        }
        inside
    }
}

/// Circle outline, a single curved side patch.
pub fn circle_profile(radius: f64, segments: usize) -> Profile {
    let points = (0..segments)
        .map(|k| {
            let a = TAU * k as f64 / segments as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    Profile { points, edge_patch: vec![0; segments], edge_planar: vec![false; segments], center: [0.0, 0.0] }
}

/// L-shaped outline `(0,0) (2,0) (2,1) (1,1) (1,2) (0,2)` scaled by `s`.
pub fn l_profile(s: f64) -> Profile {
    let p = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]].map(|[x, y]| [x * s, y * s]);
    Profile::polygon(&p, [0.5 * s, 0.5 * s])
}

/// Eight-sided staircase outline; edge `k` gets patch id `STAIRCASE_IDS[k]`.
/// Ids are numbered from the top edge counter-clockwise, so the left edge is
/// 1 and the bottom edge 2.
pub fn staircase_profile() -> Profile {
    let p = [[0.0, 0.0], [10.0, 0.0], [10.0, 6.0], [6.0, 6.0], [6.0, 8.0], [4.0, 8.0], [4.0, 10.0], [0.0, 10.0]];
    let mut prof = Profile::polygon(&p, [2.0, 2.0]);
    prof.edge_patch = STAIRCASE_IDS.to_vec();
    prof
}

pub const STAIRCASE_IDS: [u32; 8] = [2, 3, 4, 5, 6, 7, 0, 1];

/// Union of four discs of radius `radius` centred at distance `offset` on
/// the axes. The four arcs meet only at reflex corners. Patch ids: 0 = top,
/// 1 = left, 2 = bottom, 3 = right disc.
pub fn four_disc_profile(offset: f64, radius: f64, arc_segments: usize) -> Profile {
    assert!(radius > offset && 2.0 * radius * radius > offset * offset);
    let t = (offset + (2.0 * radius * radius - offset * offset).sqrt()) / 2.0;
    let half = t.atan2(t - offset);
    let mut prof = Profile { points: Vec::new(), edge_patch: Vec::new(), edge_planar: Vec::new(), center: [0.0, 0.0] };
    // Right, top, left, bottom discs in counter-clockwise order.
    for (j, id) in [3u32, 0, 1, 2].into_iter().enumerate() {
        let axis = PI / 2.0 * j as f64;
        let c = [offset * axis.cos(), offset * axis.sin()];
        for s in 0..arc_segments {
            let a = axis - half + 2.0 * half * s as f64 / arc_segments as f64;
            prof.points.push([c[0] + radius * a.cos(), c[1] + radius * a.sin()]);
            prof.edge_patch.push(id);
            prof.edge_planar.push(false);
        }
    }
    prof
}

/// Five-pointed star: tips at `outer`, notches at `inner`, ten side patches.
pub fn star_profile(outer: f64, inner: f64) -> Profile {
    let p: Vec<[f64; 2]> = (0..10)
        .map(|k| {
            let a = PI / 2.0 + PI * k as f64 / 5.0;
            let r = if k % 2 == 0 { outer } else { inner };
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    Profile::polygon(&p, [0.0, 0.0])
}

/// Extrudes a profile between `z0` and `z1` with `layers` rows of side
/// quads. Side patches keep the profile ids; the bottom cap is patch `m`
/// and the top cap `m + 1`, where `m` is the number of side patches.
pub fn extrude(profile: &Profile, z0: f64, z1: f64, layers: usize) -> BRepMesh {
    let n = profile.points.len();
    let m = profile.side_patch_count();
    let [cx, cy] = profile.center;
    for k in 0..n {
        let [ax, ay] = profile.points[k];
        let [bx, by] = profile.points[(k + 1) % n];
        let area = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx);
        assert!(area > 0.0, "profile is not star-shaped about its center at edge {k}");
    }
    let mut mb = MeshBuilder::new();
    let at = |k: usize, l: usize| {
        let [x, y] = profile.points[k % n];
        Point3::new(x, y, lerp(z0, z1, l, layers))
    };
    for k in 0..n {
        for l in 0..layers {
            let a = mb.vertex(at(k, l));
            let b = mb.vertex(at(k + 1, l));
            let c = mb.vertex(at(k + 1, l + 1));
            let d = mb.vertex(at(k, l + 1));
            mb.quad(a, b, c, d, profile.edge_patch[k], profile.edge_planar[k]);
        }
    }
    let bottom_c = mb.vertex(Point3::new(cx, cy, z0));
    let top_c = mb.vertex(Point3::new(cx, cy, z1));
    for k in 0..n {
        let (b0, b1) = (mb.vertex(at(k, 0)), mb.vertex(at(k + 1, 0)));
        mb.tri(bottom_c, b1, b0, m, true);
        let (t0, t1) = (mb.vertex(at(k, layers)), mb.vertex(at(k + 1, layers)));
        mb.tri(top_c, t0, t1, m + 1, true);
    }
    mb.build()
}

/// UV sphere centred at the origin; all faces curved. With `split` the
/// northern (patch 0) and southern (patch 1) hemispheres are separate
/// patches joined by a smooth seam.
pub fn uv_sphere(radius: f64, segments: usize, rings: usize, split: bool) -> BRepMesh {
    assert!(segments >= 3 && rings >= 2 && (!split || rings % 2 == 0));
    let mut mb = MeshBuilder::new();
    let at = |i: usize, j: usize| {
        let th = PI * i as f64 / rings as f64;
        let ph = TAU * (j % segments) as f64 / segments as f64;
        Point3::new(radius * th.sin() * ph.cos(), radius * th.sin() * ph.sin(), radius * th.cos())
    };
    let north = mb.vertex(Point3::new(0.0, 0.0, radius));
    let south = mb.vertex(Point3::new(0.0, 0.0, -radius));
    let patch = |i: usize| u32::from(split && i >= rings / 2);
    for j in 0..segments {
        let (a, b) = (mb.vertex(at(1, j)), mb.vertex(at(1, j + 1)));
        mb.tri(north, a, b, patch(0), false);
        for i in 1..rings - 1 {
            let a = mb.vertex(at(i, j));
            let b = mb.vertex(at(i + 1, j));
            let c = mb.vertex(at(i + 1, j + 1));
            let d = mb.vertex(at(i, j + 1));
            mb.quad(a, b, c, d, patch(i), false);
        }
        let (a, b) = (mb.vertex(at(rings - 1, j)), mb.vertex(at(rings - 1, j + 1)));
        mb.tri(south, b, a, patch(rings - 1), false);
    }
    mb.build()
}

/// Square block `[-half, half]^2 x [z0, z1]` with a cylindrical through
/// hole of radius `radius` along z. Patch ids: sides 0 = +x, 1 = +y,
/// 2 = -x, 3 = -y; 4 = bottom, 5 = top, 6 = hole wall (curved).
pub fn cube_minus_cylinder(half: f64, radius: f64, z0: f64, z1: f64, segments: usize, layers: usize) -> BRepMesh {
    assert!(segments % 8 == 0 && radius < half);
    let m = segments;
    let ang = |k: usize| -PI / 4.0 + TAU * (k % m) as f64 / m as f64;
    let square = |k: usize| {
        let k = k % m;
        if k % (m / 4) == 0 {
            // Corners of the square sit exactly at these indices.
            let c = [(half, -half), (half, half), (-half, half), (-half, -half)][k / (m / 4)];
            return (c.0, c.1);
        }
        let (c, s) = (ang(k).cos(), ang(k).sin());
        let r = c.abs().max(s.abs());
        (half * c / r, half * s / r)
    };
    let circle = |k: usize| (radius * ang(k).cos(), radius * ang(k).sin());
    let mut mb = MeshBuilder::new();
    for k in 0..m {
        let side = (k / (m / 4)) as u32;
        let (q0, q1) = (square(k), square(k + 1));
        let (c0, c1) = (circle(k), circle(k + 1));
        for l in 0..layers {
            let (za, zb) = (lerp(z0, z1, l, layers), lerp(z0, z1, l + 1, layers));
            let a = mb.vertex(Point3::new(q0.0, q0.1, za));
            let b = mb.vertex(Point3::new(q1.0, q1.1, za));
            let c = mb.vertex(Point3::new(q1.0, q1.1, zb));
            let d = mb.vertex(Point3::new(q0.0, q0.1, zb));
            mb.quad(a, b, c, d, side, true);
            let a = mb.vertex(Point3::new(c0.0, c0.1, za));
            let b = mb.vertex(Point3::new(c1.0, c1.1, za));
            let c = mb.vertex(Point3::new(c1.0, c1.1, zb));
            let d = mb.vertex(Point3::new(c0.0, c0.1, zb));
            mb.quad(a, d, c, b, 6, false);
        }
        for (z, id) in [(z0, 4), (z1, 5)] {
            let a = mb.vertex(Point3::new(c0.0, c0.1, z));
            let b = mb.vertex(Point3::new(q0.0, q0.1, z));
            let c = mb.vertex(Point3::new(q1.0, q1.1, z));
            let d = mb.vertex(Point3::new(c1.0, c1.1, z));
            if id == 5 {
                mb.quad(a, b, c, d, id, true);
            } else {
                mb.quad(a, d, c, b, id, true);
            }
        }
    }
    mb.build()
}

/// A wide cylinder with a narrower one standing on it. The top of the wide
/// part (patch 2) is an annulus with a convex outer rim and a concave inner
/// rim, meshed with `rings` concentric rows. Patch ids: 0 = bottom disc,
/// 1 = wide wall, 2 = annulus, 3 = narrow wall, 4 = top disc.
pub fn stepped_cylinder(r_wide: f64, r_narrow: f64, h_wide: f64, h_narrow: f64, segments: usize, rings: usize) -> BRepMesh {
    assert!(r_narrow < r_wide);
    let pt = |r: f64, k: usize, z: f64| {
        let a = TAU * (k % segments) as f64 / segments as f64;
        Point3::new(r * a.cos(), r * a.sin(), z)
    };
    let z_top = h_wide + h_narrow;
    let mut mb = MeshBuilder::new();
    let c_bottom = mb.vertex(Point3::new(0.0, 0.0, 0.0));
    let c_top = mb.vertex(Point3::new(0.0, 0.0, z_top));
    for k in 0..segments {
        let (a, b) = (mb.vertex(pt(r_wide, k, 0.0)), mb.vertex(pt(r_wide, k + 1, 0.0)));
        mb.tri(c_bottom, b, a, 0, true);
        let (a, b) = (mb.vertex(pt(r_narrow, k, z_top)), mb.vertex(pt(r_narrow, k + 1, z_top)));
        mb.tri(c_top, a, b, 4, true);
        for (r, z0, z1, id) in [(r_wide, 0.0, h_wide, 1), (r_narrow, h_wide, z_top, 3)] {
            let a = mb.vertex(pt(r, k, z0));
            let b = mb.vertex(pt(r, k + 1, z0));
            let c = mb.vertex(pt(r, k + 1, z1));
            let d = mb.vertex(pt(r, k, z1));
            mb.quad(a, b, c, d, id, false);
        }
        for i in 0..rings {
            let ra = lerp(r_narrow, r_wide, i, rings);
            let rb = lerp(r_narrow, r_wide, i + 1, rings);
            let a = mb.vertex(pt(ra, k, h_wide));
            let b = mb.vertex(pt(rb, k, h_wide));
            let c = mb.vertex(pt(rb, k + 1, h_wide));
            let d = mb.vertex(pt(ra, k + 1, h_wide));
            mb.quad(a, b, c, d, 2, true);
        }
    }
    mb.build()
}

/// Exact point-membership tests for the fixture solids.
#[derive(Debug, Clone)]
pub enum Solid {
    Box { min: Point3, max: Point3 },
    Prism { profile: Profile, z0: f64, z1: f64 },
    BoxMinusCylinder { half: f64, radius: f64, z0: f64, z1: f64 },
    Sphere { center: Point3, radius: f64 },
}

impl Solid {
    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            Solid::Box { min, max } => (0..3).all(|k| p[k] > min[k] && p[k] < max[k]),
            Solid::Prism { profile, z0, z1 } => p.z > *z0 && p.z < *z1 && profile.contains(p.x, p.y),
            Solid::BoxMinusCylinder { half, radius, z0, z1 } => {
                p.x.abs() < *half && p.y.abs() < *half && p.z > *z0 && p.z < *z1 && p.x * p.x + p.y * p.y > radius * radius
            }
            Solid::Sphere { center, radius } => (p - center).norm() < *radius,
        }
    }
}

/// A fixture mesh together with the solid it approximates.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub mesh: BRepMesh,
    pub solid: Solid,
}

/// Unit cube `[-0.5, 0.5]^3`.
pub fn unit_cube_fixture() -> Fixture {
    let (min, max) = (Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
    Fixture { name: "cube", mesh: cube(min, max), solid: Solid::Box { min, max } }
}

/// Block `[-0.5, 0.5]^3` with a through hole of radius 0.25.
pub fn cube_minus_cylinder_fixture() -> Fixture {
    Fixture {
        name: "cube_minus_cylinder",
        mesh: cube_minus_cylinder(0.5, 0.25, -0.5, 0.5, 96, 1),
        solid: Solid::BoxMinusCylinder { half: 0.5, radius: 0.25, z0: -0.5, z1: 0.5 },
    }
}

/// L-bracket prism: L profile of arm width 0.5, height 0.5.
pub fn l_bracket_fixture() -> Fixture {
    let profile = l_profile(0.5);
    Fixture { name: "l_bracket", mesh: extrude(&profile, 0.0, 0.5, 1), solid: Solid::Prism { profile, z0: 0.0, z1: 0.5 } }
}

/// Outward vertex normals are handy for checks; this gives the face-area
/// weighted normal at each vertex over all patches.
pub fn vertex_normals(mesh: &BRepMesh) -> Vec<Vector3> {
    let mut n = vec![Vector3::zeros(); mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = mesh.corners(t);
        let f = crate::geom::triangle_cross(&a, &b, &c);
        for &v in tri {
            n[v as usize] += f;
        }
    }
    n.iter().map(|v| v.normalize()).collect()
}
