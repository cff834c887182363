//! Scalar fields that can be evaluated in batches: trained networks under
//! their tree, analytic solids and compositions of both.

use rayon::prelude::*;

use crate::field::{Checkpoint, NeuralField};
use crate::geom::{Point3, Vector3};
use crate::tree::BooleanTree;

/// Rows per parallel work unit when evaluating a network.
const EVAL_CHUNK: usize = 1024;

/// A scalar field on `R^3`, negative inside.
pub trait ImplicitField: Sync {
    fn values(&self, points: &[Point3]) -> Vec<f64>;

    /// Central differences unless a field knows better.
    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        const H: f64 = 1e-6;
        let mut probes = Vec::with_capacity(points.len() * 6);
        for p in points {
            for k in 0..3 {
                let mut e = Vector3::zeros();
                e[k] = H;
                probes.push(p + e);
                probes.push(p - e);
            }
        }
        let v = self.values(&probes);
        v.chunks(6).map(|c| Vector3::new(c[0] - c[1], c[2] - c[3], c[4] - c[5]) / (2.0 * H)).collect()
    }

    fn value(&self, p: &Point3) -> f64 {
        self.values(std::slice::from_ref(p))[0]
    }

    fn gradient(&self, p: &Point3) -> Vector3 {
        self.gradients(std::slice::from_ref(p))[0]
    }
}

impl<F: ImplicitField + ?Sized> ImplicitField for &F {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        (**self).values(points)
    }
    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        (**self).gradients(points)
    }
}

impl<F: ImplicitField + ?Sized> ImplicitField for Box<F> {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        (**self).values(points)
    }
    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        (**self).gradients(points)
    }
}

/// `h` of a network under its Boolean tree, in the training frame.
#[derive(Debug, Clone, Copy)]
pub struct TreeField<'a> {
    pub field: &'a NeuralField,
    pub tree: &'a BooleanTree,
}

impl<'a> TreeField<'a> {
    pub fn new(field: &'a NeuralField, tree: &'a BooleanTree) -> Self {
        Self { field, tree }
    }

    pub fn of(c: &'a Checkpoint) -> Self {
        Self { field: &c.field, tree: &c.tree }
    }
}

impl ImplicitField for TreeField<'_> {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        points
            .par_chunks(EVAL_CHUNK)
            .flat_map_iter(|chunk| {
                let out = self.field.forward_batch(chunk);
                (0..chunk.len())
                    .map(|r| self.tree.evaluate_unchecked(out.row(r).as_slice().unwrap()).0)
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        points
            .par_chunks(EVAL_CHUNK)
            .flat_map_iter(|chunk| {
                let jet = self.field.jet_batch(chunk);
                (0..chunk.len())
                    .map(|r| {
                        let (_, leaf) = self.tree.evaluate_unchecked(jet.values.row(r).as_slice().unwrap());
                        jet.gradient(r, self.tree.leaf_slot(leaf) as usize)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// A field given by a closure; gradients by central differences.
pub struct FnField<F>(pub F);

impl<F: Fn(&Point3) -> f64 + Sync> ImplicitField for FnField<F> {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        points.iter().map(&self.0).collect()
    }
}

/// `|x - c| - r`.
#[derive(Debug, Clone, Copy)]
pub struct SphereField {
    pub center: Point3,
    pub radius: f64,
}

impl ImplicitField for SphereField {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        points.iter().map(|p| (p - self.center).norm() - self.radius).collect()
    }

    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        points
            .iter()
            .map(|p| {
                let d = p - self.center;
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vector3::x()
                }
            })
            .collect()
    }
}

/// `max_k |x_k - c_k| - r_k`: exact inside, a lower bound on the distance
/// outside.
#[derive(Debug, Clone, Copy)]
pub struct BoxField {
    pub center: Point3,
    pub half: Vector3,
}

impl BoxField {
    pub fn cube(half: f64) -> Self {
        Self { center: Point3::origin(), half: Vector3::repeat(half) }
    }

    pub fn from_corners(min: Point3, max: Point3) -> Self {
        Self { center: nalgebra::center(&min, &max), half: (max - min) / 2.0 }
    }

    fn eval(&self, p: &Point3) -> (f64, usize) {
        let d = p - self.center;
        let mut best = (f64::NEG_INFINITY, 0);
        for k in 0..3 {
            let v = d[k].abs() - self.half[k];
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }
}

impl ImplicitField for BoxField {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        points.iter().map(|p| self.eval(p).0).collect()
    }

    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        points
            .iter()
            .map(|p| {
                let k = self.eval(p).1;
                let mut g = Vector3::zeros();
                g[k] = if p[k] >= self.center[k] { 1.0 } else { -1.0 };
                g
            })
            .collect()
    }
}

/// `n·x - d` with unit `n`.
#[derive(Debug, Clone, Copy)]
pub struct PlaneField {
    pub normal: Vector3,
    pub offset: f64,
}

impl ImplicitField for PlaneField {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        points.iter().map(|p| self.normal.dot(&p.coords) - self.offset).collect()
    }

    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        vec![self.normal; points.len()]
    }
}

/// `f - t`.
pub struct Shifted<F> {
    pub inner: F,
    pub shift: f64,
}

impl<F: ImplicitField> ImplicitField for Shifted<F> {
    fn values(&self, points: &[Point3]) -> Vec<f64> {
        let mut v = self.inner.values(points);
        v.iter_mut().for_each(|x| *x -= self.shift);
        v
    }

    fn gradients(&self, points: &[Point3]) -> Vec<Vector3> {
        self.inner.gradients(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradients_match_differences() {
        let s = SphereField { center: Point3::new(0.1, 0.0, -0.2), radius: 0.4 };
        let b = BoxField { center: Point3::new(0.0, 0.1, 0.0), half: Vector3::new(0.3, 0.4, 0.5) };
        let pl = PlaneField { normal: Vector3::new(0.6, 0.0, 0.8), offset: 0.1 };
        let p = Point3::new(0.31, -0.27, 0.12);
        for f in [&s as &dyn ImplicitField, &b, &pl] {
            let fd = FnField(|x: &Point3| f.value(x)).gradient(&p);
            assert!((f.gradient(&p) - fd).norm() < 1e-6);
        }
    }

    #[test]
    fn tree_field_matches_single_point_evaluation() {
        let field = NeuralField::geometric_init(&NeuralField::layer_sizes(16, 2, 2), 0.5, 3, 100.0);
        let tree = BooleanTree::parse("max(f0,min(f1,f0))").unwrap();
        let tf = TreeField::new(&field, &tree);
        let pts: Vec<Point3> = (0..2500).map(|i| Point3::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), 0.3)).collect();
        let v = tf.values(&pts);
        let g = tf.gradients(&pts);
        for i in [0, 1023, 1024, 2499] {
            let (h, grad, _) = field.evaluate_h(&tree, &pts[i]).unwrap();
            assert_eq!(v[i], h);
            assert!((g[i] - grad).norm() < 1e-12);
        }
    }

    #[test]
    fn shift_moves_the_level_set() {
        let s = Shifted { inner: SphereField { center: Point3::origin(), radius: 0.5 }, shift: 0.2 };
        assert!(s.value(&Point3::new(0.7, 0.0, 0.0)).abs() < 1e-15);
    }
}
