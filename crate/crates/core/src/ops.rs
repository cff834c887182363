//! Operations on converted solids: point queries, Booleans, offsets and
//! crease blending.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Checkpoint, NeuralField};
use crate::geom::{Point3, Vector3};
use crate::implicit::{ImplicitField, TreeField};
use crate::iso::{extract, GridSpec, IsoMesh};
use crate::tree::{BooleanTree, Node, Op};

pub const DEFAULT_BLEND_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryResult {
    pub value: f64,
    pub inside: bool,
}

/// `h` at points given in the checkpoint's input frame.
pub fn query(c: &Checkpoint, points: &[Point3]) -> Vec<QueryResult> {
    let local: Vec<Point3> = points.iter().map(|p| c.transform.apply(p)).collect();
    TreeField::of(c).values(&local).into_iter().map(|value| QueryResult { value, inside: value < 0.0 }).collect()
}

/// Level set `h = t`, in the training frame.
pub fn offset(c: &Checkpoint, t: f64, spec: &GridSpec) -> Result<IsoMesh> {
    extract(&TreeField::of(c), &GridSpec { isovalue: t, ..*spec })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BooleanOp {
    Union,
    Intersection,
    /// `a` minus `b`.
    Difference,
}

impl FromStr for BooleanOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(Self::Union),
            "intersection" => Ok(Self::Intersection),
            "difference" | "a_minus_b" => Ok(Self::Difference),
            _ => Err(Error::InvalidArgument(format!("unknown Boolean operation {s:?}"))),
        }
    }
}

/// `min(a, b)`, `max(a, b)` or `max(a, -b)`.
pub struct BooleanField<A, B> {
    pub a: A,
    pub b: B,
    pub op: BooleanOp,
}

impl<A: ImplicitField, B: ImplicitField> BooleanField<A, B> {
    fn pick(&self, a: f64, b: f64) -> (f64, bool) {
        match self.op {
            BooleanOp::Union => if b < a { (b, true) } else { (a, false) },
            BooleanOp::Intersection => if b > a { (b, true) } else { (a, false) },
            BooleanOp::Difference => if -b > a { (-b, true) } else { (a, false) },
        }
    }
}

impl<A: ImplicitField, B: ImplicitField> ImplicitField for BooleanField<A, B> {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        let (a, b) = (self.a.values(points), self.b.values(points));
        a.iter().zip(&b).map(|(&x, &y)| self.pick(x, y).0).collect()
    }

    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        let (a, b) = (self.a.values(points), self.b.values(points));
        let (ga, gb) = (self.a.gradients(points), self.b.gradients(points));
        (0..points.len())
            .map(|i| match self.pick(a[i], b[i]) {
                (_, false) => ga[i],
                (_, true) if self.op == BooleanOp::Difference => -gb[i],
                _ => gb[i],
            })
            .collect()
    }
}

/// Combines two checkpoints in the training frame of `a`. Returns whether
/// the two normalizations differ, in which case the result mixes frames.
pub fn boolean<'a>(a: &'a Checkpoint, b: &'a Checkpoint, op: BooleanOp) -> (BooleanField<TreeField<'a>, TreeField<'a>>, bool) {
    let mismatch = a.transform != b.transform;
    if mismatch {
        log::warn!("FrameMismatch: checkpoints were normalized differently ({:?} vs {:?})", a.transform, b.transform);
    }
    (BooleanField { a: TreeField::of(a), b: TreeField::of(b), op }, mismatch)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendConfig {
    /// Blend radius in field units.
    pub rho: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self { rho: DEFAULT_BLEND_RADIUS }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho > 0.0 && self.rho.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("blend radius must be positive, got {}", self.rho)))
        }
    }
}

/// Smooth binary max (`s = 1`) or min (`s = -1`) with radius `rho`:
/// `f + g + s sqrt(f² + g² + s_ρ (s_ρ - |s_ρ|) / (8ρ²))`, `s_ρ = f² + g² - ρ²`.
pub fn blend(f: f64, g: f64, rho: f64, s: f64) -> f64 {
    let q = f * f + g * g;
    let sr = q - rho * rho;
    f + g + s * (q + sr * (sr - sr.abs()) / (8.0 * rho * rho)).sqrt()
}

/// Blended value of the tree, folding each node's children left to right.
/// Also returns the smallest `sqrt(f² + g²)` over all binary folds, which
/// bounds where the sign can differ from the plain tree: the two agree in
/// sign whenever it is at least `rho`.
pub fn blend_tree(tree: &BooleanTree, values: &[f64], rho: f64) -> (f64, f64) {
    fn go(tree: &BooleanTree, n: usize, values: &[f64], rho: f64, near: &mut f64) -> f64 {
        match tree.node(n) {
            Node::Leaf { slot, .. } => values[*slot as usize],
            Node::Op { op, children } => {
                let s = if *op == Op::Max { 1.0 } else { -1.0 };
                let mut acc = go(tree, children[0], values, rho, near);
                for &c in &children[1..] {
                    let v = go(tree, c, values, rho, near);
                    *near = near.min((acc * acc + v * v).sqrt());
                    acc = blend(acc, v, rho, s);
                }
                acc
            }
        }
    }
    let mut near = f64::INFINITY;
    let v = go(tree, tree.arena_root(), values, rho, &mut near);
    (v, near)
}

/// Network under its tree with every max and min replaced by [`blend`].
#[derive(Debug, Clone, Copy)]
pub struct BlendField<'a> {
    pub field: &'a NeuralField,
    pub tree: &'a BooleanTree,
    pub rho: f64,
}

impl<'a> BlendField<'a> {
    pub fn of(c: &'a Checkpoint, cfg: &BlendConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { field: &c.field, tree: &c.tree, rho: cfg.rho })
    }

    /// Blended values with the fold distance of [`blend_tree`].
    pub fn values_with_margin(&self, points: &[Point3]) -> Vec<(f64, f64)> {
        points
            .par_chunks(1024)
            .flat_map_iter(|chunk| {
                let out = self.field.forward_batch(chunk);
                (0..chunk.len()).map(|r| blend_tree(self.tree, out.row(r).as_slice().unwrap(), self.rho)).collect::<Vec<_>>()
            })
            .collect()
    }
}

impl ImplicitField for BlendField<'_> {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        self.values_with_margin(points).into_iter().map(|v| v.0).collect()
    }
}
