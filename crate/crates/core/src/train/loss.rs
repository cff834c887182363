//! The six-term training objective and its parameter gradient.

use rayon::prelude::*;

use super::batch::Batch;
use super::config::LossWeights;
use crate::error::{Error, Result};
use crate::field::{add_assign, zeros_like, Jet, NeuralField, Params};
use crate::geom::{Point3, Vector3};
use crate::tree::BooleanTree;

/// Value of each loss term; the total is their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub position: f64,
    pub normal: f64,
    pub eikonal: f64,
    pub off_surface: f64,
    pub consistency: f64,
    pub correction: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.position + self.normal + self.eikonal + self.off_surface + self.consistency + self.correction
    }

    fn add(&mut self, o: &LossBreakdown) {
        self.position += o.position;
        self.normal += o.normal;
        self.eikonal += o.eikonal;
        self.off_surface += o.off_surface;
        self.consistency += o.consistency;
        self.correction += o.correction;
    }
}

#[inline]
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn non_finite(p: &Point3, what: &str) -> Error {
    Error::NonFiniteLoss { point: [p.x, p.y, p.z], detail: what.into() }
}

/// Loss of `field` composed by `tree` on `batch`. The correction term is
/// included only when `correction_active`.
pub fn total_loss(field: &NeuralField, tree: &BooleanTree, batch: &Batch, w: &LossWeights, correction_active: bool, chunk: usize) -> Result<LossBreakdown> {
    Ok(run(field, tree, batch, w, correction_active, chunk, false)?.0)
}

/// [`total_loss`] together with its gradient over all network parameters.
pub fn loss_gradients(
    field: &NeuralField,
    tree: &BooleanTree,
    batch: &Batch,
    w: &LossWeights,
    correction_active: bool,
    chunk: usize,
) -> Result<(LossBreakdown, Params)> {
    let (l, g) = run(field, tree, batch, w, correction_active, chunk, true)?;
    Ok((l, g.expect("gradient requested")))
}

/// Surface samples whose output disagrees with `h` by at least the tolerance.
fn violations(field: &NeuralField, tree: &BooleanTree, batch: &Batch, tol: f64, chunk: usize) -> Vec<bool> {
    let parts: Vec<Vec<bool>> = batch
        .surface
        .par_chunks(chunk)
        .zip(batch.slots.par_chunks(chunk))
        .map(|(pts, slots)| {
            let v = field.forward_batch(pts);
            (0..pts.len())
                .map(|r| {
                    let row = v.row(r);
                    let (h, _) = tree.evaluate_unchecked(row.as_slice().unwrap());
                    (row[slots[r] as usize] - h).abs() >= tol
                })
                .collect()
        })
        .collect();
    parts.concat()
}

fn run(
    field: &NeuralField,
    tree: &BooleanTree,
    batch: &Batch,
    w: &LossWeights,
    correction_active: bool,
    chunk: usize,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<Params>)> {
    let n = field.output_dim();
    if tree.slot_count() > n {
        return Err(Error::ArityMismatch { expected: tree.slot_count(), got: n });
    }
    let (ns, nl, ng) = (batch.surface.len(), batch.local.len(), batch.global.len());
    let corr = correction_active && w.correction;
    let in_d = if corr { violations(field, tree, batch, w.correction_tolerance, chunk) } else { vec![false; ns] };
    let d_count = in_d.iter().filter(|&&b| b).count();
    let points = batch.points();
    let inv_s = if ns > 0 { 1.0 / ns as f64 } else { 0.0 };
    let inv_e = if nl + ng > 0 { 1.0 / (nl + ng) as f64 } else { 0.0 };
    let inv_g = if ng > 0 { 1.0 / ng as f64 } else { 0.0 };
    let inv_d = if d_count > 0 { w.beta / d_count as f64 } else { 0.0 };

    let starts: Vec<usize> = (0..points.len()).step_by(chunk.max(1)).collect();
    let parts: Vec<Result<(LossBreakdown, Option<Params>)>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + chunk).min(points.len());
            let pts = &points[start..end];
            let (jet, cache) = if want_grad {
                let (j, c) = field.jet_cached(pts);
                (j, Some(c))
            } else {
                (field.jet_batch(pts), None)
            };
            let mut seed = Jet::zeros(pts.len(), n);
            let mut l = LossBreakdown::default();
            for r in 0..pts.len() {
                let i = start + r;
                let row = jet.values.row(r);
                let (h, leaf) = tree.evaluate_unchecked(row.as_slice().unwrap());
                let a = tree.leaf_slot(leaf) as usize;
                if !h.is_finite() {
                    return Err(non_finite(&pts[r], "h is not finite"));
                }
                if i < ns {
                    let s = batch.slots[i] as usize;
                    let f = row[s];
                    if w.position {
                        l.position += (f.abs() + h.abs()) * inv_s;
                        seed.values[[r, s]] += sgn(f) * inv_s;
                        seed.values[[r, a]] += sgn(h) * inv_s;
                    }
                    if w.normal {
                        let d = jet.gradient(r, s) - batch.normals[i];
                        let nd = d.norm();
                        if !nd.is_finite() {
                            return Err(non_finite(&pts[r], "gradient is not finite"));
                        }
                        l.normal += nd * inv_s;
                        if nd > 0.0 {
                            for k in 0..3 {
                                seed.grads[k][[r, s]] += d[k] / nd * inv_s;
                            }
                        }
                    }
                    let e = f - h;
                    if w.consistency {
                        l.consistency += e.abs() * inv_s;
                        seed.values[[r, s]] += sgn(e) * inv_s;
                        seed.values[[r, a]] -= sgn(e) * inv_s;
                    }
                    if corr && in_d[i] {
                        l.correction += e.abs() * inv_d;
                        seed.values[[r, s]] += sgn(e) * inv_d;
                        seed.values[[r, a]] -= sgn(e) * inv_d;
                    }
                    continue;
                }
                if w.eikonal {
                    let g: Vector3 = jet.gradient(r, a);
                    let ng = g.norm();
                    if !ng.is_finite() {
                        return Err(non_finite(&pts[r], "gradient is not finite"));
                    }
                    l.eikonal += (ng - 1.0).powi(2) * inv_e;
                    if ng > 0.0 {
                        for k in 0..3 {
                            seed.grads[k][[r, a]] += 2.0 * (ng - 1.0) * g[k] / ng * inv_e;
                        }
                    }
                }
                if i >= ns + nl && w.off_surface {
                    let e = (-w.alpha * h.abs()).exp();
                    l.off_surface += e * inv_g;
                    seed.values[[r, a]] += -w.alpha * sgn(h) * e * inv_g;
                }
            }
            let grad = cache.map(|c| field.backward(&c, &seed));
            Ok((l, grad))
        })
        .collect();

    let mut total = LossBreakdown::default();
    let mut grad = want_grad.then(|| zeros_like(&field.layers));
    for part in parts {
        let (l, g) = part?;
        total.add(&l);
        if let (Some(acc), Some(g)) = (grad.as_mut(), g) {
            add_assign(acc, &g);
        }
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::flatten;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `f0 = x`, `f1 = -x - 1` (so `max(f0, f1)` is a slab's distance).
    fn linear_field(rows: &[[f64; 3]], bias: &[f64]) -> NeuralField {
        let mut f = NeuralField::zeros(&[3, rows.len()], 100.0);
        f.layers[0].w = Array2::from_shape_fn((rows.len(), 3), |(i, k)| rows[i][k]);
        f.layers[0].b = bias.to_vec().into();
        f
    }

    fn batch_on_plane(n: usize, rng: &mut impl Rng) -> Batch {
        let mut b = Batch::default();
        for _ in 0..n {
            b.surface.push(Point3::new(0.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            b.normals.push(Vector3::x());
            b.slots.push(0);
        }
        b
    }

    #[test]
    fn exact_fit_has_zero_surface_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = linear_field(&[[1.0, 0.0, 0.0]], &[0.0]);
        let tree = BooleanTree::parse("f0").unwrap();
        let mut b = batch_on_plane(50, &mut rng);
        b.local = (0..40).map(|_| Point3::new(rng.random_range(-1.0..1.0), 0.3, 0.1)).collect();
        b.global = (0..40).map(|_| Point3::new(rng.random_range(-1.0..1.0), -0.2, 0.5)).collect();
        let (l, g) = loss_gradients(&f, &tree, &b, &LossWeights::default(), true, 16).unwrap();
        assert_eq!((l.position, l.normal, l.consistency, l.correction, l.eikonal), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(l.off_surface > 0.0);
        // Only the off-surface term pushes on the parameters.
        let w = LossWeights { off_surface: false, ..LossWeights::default() };
        let (_, g0) = loss_gradients(&f, &tree, &b, &w, true, 16).unwrap();
        assert!(flatten(&g0).iter().all(|&v| v == 0.0));
        assert!(flatten(&g).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn off_surface_is_one_on_the_zero_set() {
        let f = linear_field(&[[1.0, 0.0, 0.0]], &[0.0]);
        let tree = BooleanTree::parse("f0").unwrap();
        let b = Batch { global: (0..10).map(|i| Point3::new(0.0, i as f64 * 0.1, 0.0)).collect(), ..Batch::default() };
        let l = total_loss(&f, &tree, &b, &LossWeights::default(), false, 4).unwrap();
        assert!((l.off_surface - 1.0).abs() < 1e-15);
        assert_eq!(l.eikonal, 0.0);
    }

    #[test]
    fn correction_is_zero_before_it_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // f0 is never active under max with f1 = 1 on the plane.
        let f = linear_field(&[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]], &[0.0, 1.0]);
        let tree = BooleanTree::parse("max(f0,f1)").unwrap();
        let b = batch_on_plane(20, &mut rng);
        let w = LossWeights::default();
        let before = total_loss(&f, &tree, &b, &w, false, 8).unwrap();
        assert_eq!(before.correction, 0.0);
        let after = total_loss(&f, &tree, &b, &w, true, 8).unwrap();
        assert!((after.correction - 100.0).abs() < 1e-12);
        assert!((after.consistency - 1.0).abs() < 1e-12);
        let sum = after.position + after.normal + after.eikonal + after.off_surface + after.consistency + after.correction;
        assert!((after.total() - sum).abs() < 1e-12);
    }

    #[test]
    fn chunking_does_not_change_the_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = NeuralField::geometric_init(&[3, 8, 8, 2], 0.5, 1, 100.0);
        let tree = BooleanTree::parse("max(f0,f1)").unwrap();
        let mut b = batch_on_plane(30, &mut rng);
        b.slots.iter_mut().enumerate().for_each(|(i, s)| *s = (i % 2) as u32);
        b.global = (0..20).map(|_| Point3::new(rng.random_range(-1.0..1.0), 0.0, 0.0)).collect();
        let (l1, g1) = loss_gradients(&f, &tree, &b, &LossWeights::default(), true, 7).unwrap();
        let (l2, g2) = loss_gradients(&f, &tree, &b, &LossWeights::default(), true, 64).unwrap();
        assert!((l1.total() - l2.total()).abs() < 1e-12);
        let (a, c) = (flatten(&g1), flatten(&g2));
        assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn non_finite_values_are_reported() {
        let f = linear_field(&[[f64::NAN, 0.0, 0.0]], &[0.0]);
        let tree = BooleanTree::parse("f0").unwrap();
        let b = Batch { global: vec![Point3::new(0.5, 0.0, 0.0)], ..Batch::default() };
        match total_loss(&f, &tree, &b, &LossWeights::default(), false, 4) {
            Err(Error::NonFiniteLoss { point, .. }) => assert_eq!(point, [0.5, 0.0, 0.0]),
            other => panic!("{other:?}"),
        }
    }
}
