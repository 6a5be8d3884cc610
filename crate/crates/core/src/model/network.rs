//! Small dense networks trained with Adam on mini-batches.
//!
//! A network is a layer list over one flat parameter vector, so the optimizer
//! and the finite-difference gradient check see every weight uniformly.
//! Dense weights are stored row-major as `n_out x n_in`, followed by the bias.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Dense { n_in: usize, n_out: usize, offset: usize },
    Relu,
    Dropout { rate: f64 },
    /// `x + inner(x)`; inner must preserve width.
    Residual { inner: Vec<Layer> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Mean squared error over all outputs.
    Mse,
    /// Softmax followed by mean cross-entropy.
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub params: Vec<f64>,
    pub head: Head,
    pub n_in: usize,
    pub n_out: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimizer {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

enum Cache {
    Dense(Matrix),
    Relu(Matrix),
    Dropout(Vec<f64>),
    Residual(Vec<Cache>),
}

struct Shapes {
    layers: Vec<Layer>,
    n_params: usize,
}

impl Shapes {
    fn new() -> Self {
        Shapes { layers: Vec::new(), n_params: 0 }
    }

    fn dense(&mut self, n_in: usize, n_out: usize) -> Layer {
        let l = Layer::Dense { n_in, n_out, offset: self.n_params };
        self.n_params += n_in * n_out + n_out;
        l
    }
}

fn init_params(layers: &[Layer], params: &mut [f64], rng: &mut SeededRng) {
    for l in layers {
        match l {
            Layer::Dense { n_in, n_out, offset } => {
                let limit = (6.0 / *n_in as f64).sqrt();
                for w in &mut params[*offset..offset + n_in * n_out] {
                    *w = rng.random_range(-limit..limit);
                }
            }
            Layer::Residual { inner } => init_params(inner, params, rng),
            _ => {}
        }
    }
}

fn dense_forward(x: &Matrix, params: &[f64], n_in: usize, n_out: usize, offset: usize) -> Matrix {
    let w = &params[offset..offset + n_in * n_out];
    let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
    let mut y = Matrix::zeros(x.rows(), n_out);
    for i in 0..x.rows() {
        let xi = x.row(i);
        let yi = y.row_mut(i);
        for o in 0..n_out {
            let wo = &w[o * n_in..(o + 1) * n_in];
            let mut acc = b[o];
            for k in 0..n_in {
                acc += wo[k] * xi[k];
            }
            yi[o] = acc;
        }
    }
    y
}

fn forward(layers: &[Layer], params: &[f64], mut x: Matrix, train: Option<&mut SeededRng>, caches: &mut Vec<Cache>) -> Matrix {
    let mut rng = train;
    for l in layers {
        x = match l {
            Layer::Dense { n_in, n_out, offset } => {
                let y = dense_forward(&x, params, *n_in, *n_out, *offset);
                caches.push(Cache::Dense(x));
                y
            }
            Layer::Relu => {
                let mut y = x.clone();
                y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                caches.push(Cache::Relu(x));
                y
            }
            Layer::Dropout { rate } => match rng.as_deref_mut() {
                Some(g) if *rate > 0.0 => {
                    let keep = 1.0 - rate;
                    let mask: Vec<f64> =
                        (0..x.as_slice().len()).map(|_| if g.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                    x.as_mut_slice().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    caches.push(Cache::Dropout(mask));
                    x
                }
                _ => {
                    caches.push(Cache::Dropout(Vec::new()));
                    x
                }
            },
            Layer::Residual { inner } => {
                let mut sub = Vec::new();
                let mut y = forward(inner, params, x.clone(), rng.as_deref_mut(), &mut sub);
                y.as_mut_slice().iter_mut().zip(x.as_slice()).for_each(|(a, b)| *a += b);
                caches.push(Cache::Residual(sub));
                y
            }
        };
    }
    x
}

fn backward(layers: &[Layer], params: &[f64], grads: &mut [f64], caches: Vec<Cache>, mut dy: Matrix) -> Matrix {
    for (l, cache) in layers.iter().zip(caches).rev() {
        dy = match (l, cache) {
            (Layer::Dense { n_in, n_out, offset }, Cache::Dense(x)) => {
                let (n_in, n_out, offset) = (*n_in, *n_out, *offset);
                let w = &params[offset..offset + n_in * n_out];
                let mut dx = Matrix::zeros(x.rows(), n_in);
                {
                    let (gw, gb) = grads[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                    for i in 0..x.rows() {
                        let xi = x.row(i);
                        let di = dy.row(i);
                        let dxi = dx.row_mut(i);
                        for o in 0..n_out {
                            let d = di[o];
                            if d == 0.0 {
                                continue;
                            }
                            gb[o] += d;
                            let wo = &w[o * n_in..(o + 1) * n_in];
                            let go = &mut gw[o * n_in..(o + 1) * n_in];
                            for k in 0..n_in {
                                go[k] += d * xi[k];
                                dxi[k] += d * wo[k];
                            }
                        }
                    }
                }
                dx
            }
            (Layer::Relu, Cache::Relu(x)) => {
                dy.as_mut_slice().iter_mut().zip(x.as_slice()).for_each(|(d, v)| {
                    if *v <= 0.0 {
                        *d = 0.0
                    }
                });
                dy
            }
            (Layer::Dropout { .. }, Cache::Dropout(mask)) => {
                if !mask.is_empty() {
                    dy.as_mut_slice().iter_mut().zip(&mask).for_each(|(d, m)| *d *= m);
                }
                dy
            }
            (Layer::Residual { inner }, Cache::Residual(sub)) => {
                let mut dx = backward(inner, params, grads, sub, dy.clone());
                dx.as_mut_slice().iter_mut().zip(dy.as_slice()).for_each(|(a, b)| *a += b);
                dx
            }
            _ => unreachable!("cache does not match layer"),
        };
    }
    dy
}

pub fn softmax_row(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

impl Network {
    pub fn mlp(n_in: usize, hidden: &[usize], n_out: usize, dropout: f64, head: Head, rng: &mut SeededRng) -> Network {
        let mut s = Shapes::new();
        let mut prev = n_in;
        for &h in hidden {
            let d = s.dense(prev, h);
            s.layers.push(d);
            s.layers.push(Layer::Relu);
            if dropout > 0.0 {
                s.layers.push(Layer::Dropout { rate: dropout });
            }
            prev = h;
        }
        let d = s.dense(prev, n_out);
        s.layers.push(d);
        Network::finish(s, head, n_in, n_out, rng)
    }

    pub fn resnet(n_in: usize, size: usize, blocks: usize, n_out: usize, dropout: f64, head: Head, rng: &mut SeededRng) -> Network {
        let mut s = Shapes::new();
        let proj = s.dense(n_in, size);
        s.layers.push(proj);
        for _ in 0..blocks {
            let mut inner = vec![s.dense(size, size), Layer::Relu];
            if dropout > 0.0 {
                inner.push(Layer::Dropout { rate: dropout });
            }
            inner.push(s.dense(size, size));
            s.layers.push(Layer::Residual { inner });
        }
        let out = s.dense(size, n_out);
        s.layers.push(out);
        Network::finish(s, head, n_in, n_out, rng)
    }

    fn finish(s: Shapes, head: Head, n_in: usize, n_out: usize, rng: &mut SeededRng) -> Network {
        let mut params = vec![0.0; s.n_params];
        init_params(&s.layers, &mut params, rng);
        Network { layers: s.layers, params, head, n_in, n_out }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Raw head inputs (pre-softmax for classification).
    pub fn logits(&self, x: &Matrix) -> Matrix {
        forward(&self.layers, &self.params, x.clone(), None, &mut Vec::new())
    }

    /// Outputs after the head: regression values or class probabilities.
    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut z = self.logits(x);
        if self.head == Head::SoftmaxCrossEntropy {
            for i in 0..z.rows() {
                softmax_row(z.row_mut(i));
            }
        }
        z
    }

    fn loss_from_logits(&self, z: &Matrix, y: &Matrix) -> (f64, Matrix) {
        let b = z.rows() as f64;
        let mut dz = z.clone();
        let mut loss = 0.0;
        match self.head {
            Head::Mse => {
                let k = z.cols() as f64;
                for ((d, zv), yv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()).zip(y.as_slice()) {
                    let r = zv - yv;
                    loss += r * r;
                    *d = 2.0 * r / (b * k);
                }
                loss /= b * k;
            }
            Head::SoftmaxCrossEntropy => {
                for i in 0..z.rows() {
                    let p = dz.row_mut(i);
                    softmax_row(p);
                    for (j, pj) in p.iter_mut().enumerate() {
                        let t = y.get(i, j);
                        if t > 0.0 {
                            loss -= t * pj.max(1e-300).ln();
                        }
                        *pj = (*pj - t) / b;
                    }
                }
                loss /= b;
            }
        }
        (loss, dz)
    }

    /// Mean loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: &Matrix, y: &Matrix, dropout_rng: Option<&mut SeededRng>) -> (f64, Vec<f64>) {
        let mut caches = Vec::new();
        let z = forward(&self.layers, &self.params, x.clone(), dropout_rng, &mut caches);
        let (loss, dz) = self.loss_from_logits(&z, y);
        let mut grads = vec![0.0; self.params.len()];
        backward(&self.layers, &self.params, &mut grads, caches, dz);
        (loss, grads)
    }

    pub fn loss(&self, x: &Matrix, y: &Matrix) -> f64 {
        self.loss_from_logits(&self.logits(x), y).0
    }

    /// Mini-batch Adam. Returns the mean batch loss of each epoch.
    pub fn train(&mut self, x: &Matrix, y: &Matrix, opt: &Optimizer, rng: &mut SeededRng) -> Vec<f64> {
        let n = x.rows();
        let (mut m, mut v) = (vec![0.0; self.params.len()], vec![0.0; self.params.len()]);
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(opt.epochs);
        for _ in 0..opt.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(opt.batch_size) {
                let xb = x.select_rows(chunk);
                let yb = y.select_rows(chunk);
                let (loss, g) = self.loss_and_grad(&xb, &yb, Some(rng));
                total += loss;
                batches += 1;
                step += 1;
                let c1 = 1.0 - opt.beta1.powi(step);
                let c2 = 1.0 - opt.beta2.powi(step);
                for i in 0..self.params.len() {
                    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
                    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
                    self.params[i] -= opt.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-8);
                }
            }
            history.push(if batches > 0 { total / batches as f64 } else { 0.0 });
        }
        history
    }

    /// Largest relative deviation between backprop gradients and central
    /// finite differences with step `h`. Dropout is disabled. Deviations are
    /// measured relative to `max(|analytic|, |numeric|, 1e-6)`.
    pub fn gradient_check(&self, x: &Matrix, y: &Matrix, h: f64) -> f64 {
        let (_, analytic) = self.loss_and_grad(x, y, None);
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        for i in 0..self.params.len() {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let up = probe.loss(x, y);
            probe.params[i] = orig - h;
            let down = probe.loss(x, y);
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random(rows: usize, cols: usize, g: &mut SeededRng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| g.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn mlp_2_4_1_gradients() {
        let mut g = rng::seeded(1);
        let net = Network::mlp(2, &[4], 1, 0.0, Head::Mse, &mut g);
        let (x, y) = (random(16, 2, &mut g), random(16, 1, &mut g));
        assert!(net.gradient_check(&x, &y, 1e-5) < 1e-4);
    }

    #[test]
    fn resnet_gradients() {
        let mut g = rng::seeded(2);
        let net = Network::resnet(3, 8, 1, 2, 0.0, Head::SoftmaxCrossEntropy, &mut g);
        assert!(net.n_params() <= 1000);
        let x = random(10, 3, &mut g);
        let y = Matrix::from_rows(&(0..10).map(|i| if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect::<Vec<_>>()).unwrap();
        assert!(net.gradient_check(&x, &y, 1e-5) < 1e-4);
    }

    #[test]
    fn linear_network_matches_least_squares_gradient() {
        let mut g = rng::seeded(3);
        let net = Network::mlp(3, &[], 2, 0.0, Head::Mse, &mut g);
        let (x, y) = (random(12, 3, &mut g), random(12, 2, &mut g));
        let (_, grad) = net.loss_and_grad(&x, &y, None);
        // closed form: dL/dW = 2/(n k) * R^T X, dL/db = 2/(n k) * sum R, R = XW^T + b - Y
        let (n, k) = (12.0, 2.0);
        let w = &net.params[..6];
        let b = &net.params[6..8];
        let mut expect = vec![0.0; 8];
        for i in 0..12 {
            for o in 0..2 {
                let pred: f64 = b[o] + (0..3).map(|j| w[o * 3 + j] * x.get(i, j)).sum::<f64>();
                let r = pred - y.get(i, o);
                for j in 0..3 {
                    expect[o * 3 + j] += 2.0 * r * x.get(i, j) / (n * k);
                }
                expect[6 + o] += 2.0 * r / (n * k);
            }
        }
        for (a, e) in grad.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = rng::seeded(4);
        let net = Network::mlp(4, &[8], 3, 0.0, Head::SoftmaxCrossEntropy, &mut g);
        let p = net.forward(&random(50, 4, &mut g));
        for r in p.iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|v| *v > 0.0 && *v < 1.0));
        }
    }

    #[test]
    fn dropout_is_identity_at_inference() {
        let mut g = rng::seeded(5);
        let with = Network::mlp(2, &[4], 1, 0.5, Head::Mse, &mut rng::seeded(9));
        let without = Network::mlp(2, &[4], 1, 0.0, Head::Mse, &mut rng::seeded(9));
        let x = random(5, 2, &mut g);
        assert_eq!(with.forward(&x), without.forward(&x));
    }
}
