//! Adam with bias correction.

use ndarray::Zip;

use crate::field::{zeros_like, Layer, Params};

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    pub fn new(like: &[Layer]) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: zeros_like(like), v: zeros_like(like), t: 0 }
    }

    pub fn step(&mut self, params: &mut [Layer], grads: &[Layer], lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut p.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(update);
            Zip::from(&mut p.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(update);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![Layer::zeros(2, 1)];
        let mut g = vec![Layer::zeros(2, 1)];
        g[0].w[[0, 0]] = 3.0;
        g[0].w[[0, 1]] = -0.001;
        let mut adam = Adam::new(&p);
        adam.step(&mut p, &g, 0.1);
        assert!((p[0].w[[0, 0]] + 0.1).abs() < 1e-8);
        assert!((p[0].w[[0, 1]] - 0.1).abs() < 1e-4);
        assert_eq!(p[0].b[0], 0.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![Layer::zeros(1, 1)];
        p[0].w[[0, 0]] = 5.0;
        let mut adam = Adam::new(&p);
        for _ in 0..2000 {
            let mut g = vec![Layer::zeros(1, 1)];
            g[0].w[[0, 0]] = 2.0 * (p[0].w[[0, 0]] - 1.5);
            adam.step(&mut p, &g, 0.05);
        }
        assert!((p[0].w[[0, 0]] - 1.5).abs() < 1e-3);
    }
}
