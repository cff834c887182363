//! The shared MLP `R^3 -> R^n` with SoftPlus hidden layers.
//!
//! Besides values, the network propagates the three input tangents
//! alongside the activations, so every evaluation also yields the exact
//! Jacobian `∂f/∂x`. [`NeuralField::backward`] differentiates any loss of
//! values and Jacobians with respect to the parameters, including the
//! second-order terms that come from the Jacobian.

mod checkpoint;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::geom::{Point3, Vector3};
use crate::tree::BooleanTree;

pub const DEFAULT_WIDTH: usize = 256;
pub const DEFAULT_DEPTH: usize = 3;
pub const DEFAULT_BETA: f64 = 100.0;
pub const DEFAULT_INIT_RADIUS: f64 = 0.5;

/// `ln(1 + e^{βt}) / β` without overflow.
#[inline]
pub fn softplus(t: f64, beta: f64) -> f64 {
    let u = beta * t;
    (u.max(0.0) + (-u.abs()).exp().ln_1p()) / beta
}

/// Derivative of [`softplus`]: the logistic function of `βt`.
#[inline]
pub fn softplus_grad(t: f64, beta: f64) -> f64 {
    let u = beta * t;
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// One affine map, `w` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { w: Array2::zeros((fan_out, fan_in)), b: Array1::zeros(fan_out) }
    }
}

/// Parameter-shaped container, used for gradients and optimizer moments.
pub type Params = Vec<Layer>;

pub fn zeros_like(layers: &[Layer]) -> Params {
    layers.iter().map(|l| Layer::zeros(l.w.ncols(), l.w.nrows())).collect()
}

pub fn add_assign(acc: &mut [Layer], g: &[Layer]) {
    for (a, g) in acc.iter_mut().zip(g) {
        a.w += &g.w;
        a.b += &g.b;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralField {
    pub layers: Vec<Layer>,
    pub beta: f64,
}

/// Values and input Jacobians of a batch: `values` is `B × n`, `grads[k]`
/// holds `∂f/∂x_k`.
#[derive(Debug, Clone)]
pub struct Jet {
    pub values: Array2<f64>,
    pub grads: [Array2<f64>; 3],
}

impl Jet {
    pub fn gradient(&self, row: usize, slot: usize) -> Vector3 {
        Vector3::new(self.grads[0][[row, slot]], self.grads[1][[row, slot]], self.grads[2][[row, slot]])
    }

    pub fn zeros(rows: usize, n: usize) -> Self {
        let z = Array2::zeros((rows, n));
        Self { values: z.clone(), grads: [z.clone(), z.clone(), z] }
    }
}

/// Intermediate state kept for [`NeuralField::backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    x: Array2<f64>,
    /// Input activation of every layer after the first, and its tangents.
    a: Vec<Array2<f64>>,
    da: Vec<[Array2<f64>; 3]>,
    /// Pre-activations of hidden layers and their tangents.
    z: Vec<Array2<f64>>,
    dz: Vec<[Array2<f64>; 3]>,
}

fn points_matrix(xs: &[Point3]) -> Array2<f64> {
    Array2::from_shape_fn((xs.len(), 3), |(i, k)| xs[i][k])
}

/// `out = a · wᵀ (+ b)`.
fn affine(a: &ArrayView2<f64>, layer: &Layer, bias: bool) -> Array2<f64> {
    let mut out = if bias {
        layer.b.broadcast((a.nrows(), layer.b.len())).unwrap().to_owned()
    } else {
        Array2::zeros((a.nrows(), layer.b.len()))
    };
    general_mat_mul(1.0, a, &layer.w.t(), if bias { 1.0 } else { 0.0 }, &mut out);
    out
}

impl NeuralField {
    pub fn zeros(sizes: &[usize], beta: f64) -> Self {
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self { layers, beta }
    }

    /// `[3, width × depth, n]`.
    pub fn layer_sizes(width: usize, depth: usize, n: usize) -> Vec<usize> {
        let mut s = vec![3];
        s.extend(std::iter::repeat_n(width, depth));
        s.push(n);
        s
    }

    /// Geometric initialization: every output starts close to the signed
    /// distance of the sphere of `radius` around the origin.
    ///
    /// Hidden layers follow the usual recipe (`N(0, √2/√fan_out)`, zero
    /// bias). At small widths the recipe's output layer fits the sphere
    /// poorly, so it is replaced by a ridge least-squares readout of the
    /// sphere distance over fixed points in `[-1, 1]^3`.
    pub fn geometric_init(sizes: &[usize], radius: f64, seed: u64, beta: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Self::zeros(sizes, beta);
        let last = f.layers.len() - 1;
        for layer in &mut f.layers[..last] {
            let d = Normal::new(0.0, 2f64.sqrt() / (layer.w.nrows() as f64).sqrt()).unwrap();
            layer.w.mapv_inplace(|_| d.sample(&mut rng));
        }
        let width = f.layers[last].w.ncols();
        let pts: Vec<Point3> = (0..4096)
            .map(|_| {
                use rand::Rng;
                Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
            .collect();
        let features = if last == 0 {
            points_matrix(&pts)
        } else {
            Self { layers: f.layers[..last].to_vec(), beta }.forward_batch(&pts).mapv(|t| softplus(t, beta))
        };
        let mut ata = nalgebra::DMatrix::<f64>::zeros(width + 1, width + 1);
        let mut atb = nalgebra::DVector::<f64>::zeros(width + 1);
        for (i, p) in pts.iter().enumerate() {
            let row: Vec<f64> = features.row(i).iter().copied().chain([1.0]).collect();
            let t = p.coords.norm() - radius;
            for a in 0..=width {
                atb[a] += row[a] * t;
                for b in 0..=width {
                    ata[(a, b)] += row[a] * row[b];
                }
            }
        }
        let ridge = 1e-6 * ata.trace() / (width + 1) as f64;
        for a in 0..=width {
            ata[(a, a)] += ridge;
        }
        let sol = ata.cholesky().expect("ridge system is positive definite").solve(&atb);
        let out = &mut f.layers[last];
        for r in 0..out.w.nrows() {
            for c in 0..width {
                out.w[[r, c]] = sol[c];
            }
            out.b[r] = sol[width];
        }
        f
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.ncols()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters in layer order, each layer as `w` (row-major) then `b`.
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
    }

    /// Values only, `B × n`.
    pub fn forward_batch(&self, xs: &[Point3]) -> Array2<f64> {
        let mut a = points_matrix(xs);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = affine(&a.view(), layer, true);
            if i < last {
                let beta = self.beta;
                z.mapv_inplace(|t| softplus(t, beta));
            }
            a = z;
        }
        a
    }

    pub fn forward(&self, x: &Point3) -> Vec<f64> {
        self.forward_batch(std::slice::from_ref(x)).row(0).to_vec()
    }

    /// Values and exact Jacobians.
    pub fn jet_batch(&self, xs: &[Point3]) -> Jet {
        self.jet_cached(xs).0
    }

    /// `∂f_i/∂x` for every output `i`.
    pub fn input_gradient(&self, x: &Point3) -> Vec<Vector3> {
        let jet = self.jet_batch(std::slice::from_ref(x));
        (0..self.output_dim()).map(|i| jet.gradient(0, i)).collect()
    }

    /// Like [`jet_batch`](Self::jet_batch), keeping what `backward` needs.
    pub fn jet_cached(&self, xs: &[Point3]) -> (Jet, Cache) {
        let rows = xs.len();
        let x = points_matrix(xs);
        let last = self.layers.len() - 1;
        let mut cache = Cache { x: x.clone(), a: Vec::new(), da: Vec::new(), z: Vec::new(), dz: Vec::new() };
        let mut a = x;
        let mut da: Option<[Array2<f64>; 3]> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(&a.view(), layer, true);
            let dz: [Array2<f64>; 3] = match &da {
                None => std::array::from_fn(|k| layer.w.column(k).broadcast((rows, layer.b.len())).unwrap().to_owned()),
                Some(da) => std::array::from_fn(|k| affine(&da[k].view(), layer, false)),
            };
            if i > 0 {
                cache.a.push(a);
                cache.da.push(da.take().unwrap());
            }
            if i == last {
                return (Jet { values: z, grads: dz }, cache);
            }
            let beta = self.beta;
            let s = z.mapv(|t| softplus_grad(t, beta));
            a = z.mapv(|t| softplus(t, beta));
            da = Some(std::array::from_fn(|k| &dz[k] * &s));
            cache.z.push(z);
            cache.dz.push(dz);
        }
        unreachable!("a network has at least one layer")
    }

    /// Parameter gradient of a loss `L(values, grads)` given `∂L/∂values`
    /// and `∂L/∂grads[k]` (all `B × n`).
    pub fn backward(&self, cache: &Cache, seed: &Jet) -> Params {
        let beta = self.beta;
        let last = self.layers.len() - 1;
        let mut out = zeros_like(&self.layers);
        let mut g = seed.values.clone();
        let mut gd = seed.grads.clone();
        for i in (0..=last).rev() {
            let layer = &self.layers[i];
            if i < last {
                // Through the activation: a = sp(z), da_k = sp'(z) dz_k.
                let z = &cache.z[i];
                let dz = &cache.dz[i];
                let s = z.mapv(|t| softplus_grad(t, beta));
                let mut gz = &g * &s;
                for k in 0..3 {
                    Zip::from(&mut gz).and(&gd[k]).and(&dz[k]).and(&s).for_each(|gz, &gdk, &dzk, &s| {
                        *gz += gdk * dzk * beta * s * (1.0 - s);
                    });
                    gd[k] *= &s;
                }
                g = gz;
            }
            let grad = &mut out[i];
            grad.b = g.sum_axis(Axis(0));
            if i == 0 {
                general_mat_mul(1.0, &g.t(), &cache.x, 0.0, &mut grad.w);
                for k in 0..3 {
                    let col = gd[k].sum_axis(Axis(0));
                    let mut wk = grad.w.column_mut(k);
                    wk += &col;
                }
            } else {
                let a = &cache.a[i - 1];
                let da = &cache.da[i - 1];
                general_mat_mul(1.0, &g.t(), a, 0.0, &mut grad.w);
                for k in 0..3 {
                    general_mat_mul(1.0, &gd[k].t(), &da[k], 1.0, &mut grad.w);
                }
                g = g.dot(&layer.w);
                for d in &mut gd {
                    *d = d.dot(&layer.w);
                }
            }
        }
        out
    }

    /// `h(x)`, its gradient (the active leaf's gradient) and the active leaf id.
    pub fn evaluate_h(&self, tree: &BooleanTree, x: &Point3) -> Result<(f64, Vector3, usize)> {
        let jet = self.jet_batch(std::slice::from_ref(x));
        let values: Vec<f64> = jet.values.row(0).to_vec();
        let (h, leaf) = tree.evaluate(&values)?;
        Ok((h, jet.gradient(0, tree.leaf_slot(leaf) as usize), leaf))
    }
}

pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
}
