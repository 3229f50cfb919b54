//! Three-layer ReLU network `f(x) = (1/alpha) A relu(W2 [relu(W1 [x; 1]); c])`.
//!
//! Both hidden layers have width `m`. Biases live in the last column of `W1`
//! and `W2`; the constant `c` fed to the second-layer bias is
//! [`Network::hidden_bias_input`], which initialization sets to `beta1` so the
//! bias scales with the hidden activations it is added to.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use train::{gauss_newton_top, train, Schedule, StepSize, StopReason, TrainRecord};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_atb, matmul, mul_ab_prefix, mul_abt, Matrix};
use crate::scaling::HyperConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// m x (d+1), bias in the last column
    pub w1: Matrix,
    /// m x (m+1), bias in the last column
    pub w2: Matrix,
    /// d_out x m
    pub a: Matrix,
    pub alpha: f64,
    pub hidden_bias_input: f64,
}

impl Network {
    pub fn new(w1: Matrix, w2: Matrix, a: Matrix, alpha: f64, hidden_bias_input: f64) -> Result<Self> {
        let net = Network {
            w1,
            w2,
            a,
            alpha,
            hidden_bias_input,
        };
        net.check()?;
        Ok(net)
    }

    pub fn zeros(d: usize, m: usize, d_out: usize, alpha: f64) -> Self {
        Network {
            w1: Matrix::zeros(m, d + 1),
            w2: Matrix::zeros(m, m + 1),
            a: Matrix::zeros(d_out, m),
            alpha,
            hidden_bias_input: 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let m = self.w1.rows();
        if m == 0 || self.w1.cols() < 2 || self.a.rows() == 0 {
            return Err(Error::Dimension("network needs m, d, d_out >= 1".into()));
        }
        if self.w2.shape() != (m, m + 1) {
            return Err(Error::Dimension(format!(
                "W2 is {:?}, expected ({m}, {})",
                self.w2.shape(),
                m + 1
            )));
        }
        if self.a.cols() != m {
            return Err(Error::Dimension(format!(
                "A has {} columns, expected {m}",
                self.a.cols()
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w1.rows()
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.w1.cols() - 1
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn num_params(&self) -> usize {
        self.w1.as_slice().len() + self.w2.as_slice().len() + self.a.as_slice().len()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite() && self.a.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    x: Matrix,
    y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidData("dataset is empty".into()));
        }
        if x.rows() != y.rows() {
            return Err(Error::InvalidData(format!(
                "{} inputs but {} targets",
                x.rows(),
                y.rows()
            )));
        }
        if x.cols() == 0 || y.cols() == 0 {
            return Err(Error::InvalidData("zero-dimensional inputs or targets".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.cols()
    }
}

/// Activations kept by the forward pass for back-propagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// n x (d+1), inputs with the constant 1 appended
    pub xt: Matrix,
    pub z1: Matrix,
    /// n x (m+1), first hidden activations with the bias input appended
    pub ht: Matrix,
    pub z2: Matrix,
    pub g: Matrix,
    pub f: Matrix,
}

impl ForwardCache {
    fn new(n: usize, d: usize, m: usize, d_out: usize) -> Self {
        ForwardCache {
            xt: Matrix::zeros(n, d + 1),
            z1: Matrix::zeros(n, m),
            ht: Matrix::zeros(n, m + 1),
            z2: Matrix::zeros(n, m),
            g: Matrix::zeros(n, m),
            f: Matrix::zeros(n, d_out),
        }
    }

    pub(crate) fn for_inputs(net: &Network, x: &Matrix) -> Result<Self> {
        if x.cols() != net.input_dim() {
            return Err(Error::Dimension(format!(
                "inputs have {} columns, network expects {}",
                x.cols(),
                net.input_dim()
            )));
        }
        let n = x.rows();
        let d = x.cols();
        let mut cache = ForwardCache::new(n, d, net.width(), net.output_dim());
        for i in 0..n {
            let row = cache.xt.row_mut(i);
            row[..d].copy_from_slice(x.row(i));
            row[d] = 1.0;
        }
        Ok(cache)
    }

    /// Recomputes every activation for the current weights.
    pub(crate) fn run(&mut self, net: &Network) {
        self.first_layer(net);
        mul_abt(&self.ht, &net.w2, &mut self.z2);
        self.output_layer(net);
    }

    /// `z1` and `ht` from `W1`.
    pub(crate) fn first_layer(&mut self, net: &Network) {
        let m = net.width();
        mul_abt(&self.xt, &net.w1, &mut self.z1);
        for i in 0..self.z1.rows() {
            let h = self.ht.row_mut(i);
            for (hk, zk) in h.iter_mut().zip(self.z1.row(i)) {
                *hk = zk.max(0.0);
            }
            h[m] = net.hidden_bias_input;
        }
    }

    /// `g` and `f` from an up-to-date `z2`.
    pub(crate) fn output_layer(&mut self, net: &Network) {
        for (gk, zk) in self.g.as_mut_slice().iter_mut().zip(self.z2.as_slice()) {
            *gk = zk.max(0.0);
        }
        mul_abt(&self.g, &net.a, &mut self.f);
        self.f.scale(1.0 / net.alpha);
    }
}

/// Predictions for every row of `x` plus the activations behind them.
pub fn forward(net: &Network, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    net.check()?;
    let mut cache = ForwardCache::for_inputs(net, x)?;
    cache.run(net);
    Ok((cache.f.clone(), cache))
}

/// Half mean squared error summed over outputs: `(1/2n) sum_i |f(x_i) - y_i|^2`.
pub fn loss(net: &Network, data: &Dataset) -> Result<f64> {
    check_data(net, data)?;
    let (pred, _) = forward(net, data.x())?;
    Ok(half_mse(&pred, data.y()))
}

pub(crate) fn half_mse(pred: &Matrix, y: &Matrix) -> f64 {
    let n = pred.rows() as f64;
    let sq: f64 = pred
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    sq / (2.0 * n)
}

fn check_data(net: &Network, data: &Dataset) -> Result<()> {
    if data.output_dim() != net.output_dim() {
        return Err(Error::Dimension(format!(
            "targets have {} columns, network has {} outputs",
            data.output_dim(),
            net.output_dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub w2: Matrix,
    pub a: Matrix,
}

/// Exact gradient of [`loss`] with respect to `W1`, `W2` and `A` (`relu'(0) = 0`).
pub fn backward(net: &Network, data: &Dataset) -> Result<Gradients> {
    check_data(net, data)?;
    let (_, cache) = forward(net, data.x())?;
    let n = data.len();
    let m = net.width();
    let mut e = cache.f.clone();
    e.add_scaled(-1.0, data.y());
    e.scale(1.0 / n as f64);

    let mut ga = Matrix::zeros(net.output_dim(), m);
    add_atb(&mut ga, 1.0 / net.alpha, &e, &cache.g);

    let mut d2 = matmul(&e, &net.a);
    d2.scale(1.0 / net.alpha);
    relu_mask(&mut d2, &cache.z2);
    let mut gw2 = Matrix::zeros(m, m + 1);
    add_atb(&mut gw2, 1.0, &d2, &cache.ht);

    let mut d1 = Matrix::zeros(n, m);
    mul_ab_prefix(&d2, &net.w2, m, &mut d1);
    relu_mask(&mut d1, &cache.z1);
    let mut gw1 = Matrix::zeros(m, net.input_dim() + 1);
    add_atb(&mut gw1, 1.0, &d1, &cache.xt);

    Ok(Gradients {
        w1: gw1,
        w2: gw2,
        a: ga,
    })
}

/// Zeroes entries of `delta` where the matching pre-activation is not positive.
pub(crate) fn relu_mask(delta: &mut Matrix, pre: &Matrix) {
    for (dv, z) in delta.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if *z <= 0.0 {
            *dv = 0.0;
        }
    }
}

/// Draws i.i.d. Gaussian weights: W1 entries with std `beta1`, W2 with `beta2`,
/// A with `beta3`, bias columns included. Draw order is W1, W2, A, each row-major.
pub fn init_network<R: Rng + ?Sized>(config: &HyperConfig, rng: &mut R) -> Result<Network> {
    config.validate()?;
    let (m, d, d_out) = (config.m, config.d, config.d_out);
    let [b1, b2, b3] = config.beta_values();
    let mut draw = |rows: usize, cols: usize, std: f64| {
        let data = (0..rows * cols)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Matrix::from_vec(rows, cols, data)
    };
    let w1 = draw(m, d + 1, b1);
    let w2 = draw(m, m + 1, b2);
    let a = draw(d_out, m, b3);
    Network::new(w1, w2, a, config.alpha_value(), b1)
}

/// [`init_network`] with the crate's standard generator (ChaCha8 seeded from `seed`).
pub fn init_network_seeded(config: &HyperConfig, seed: u64) -> Result<Network> {
    init_network(config, &mut seeded_rng(seed))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
