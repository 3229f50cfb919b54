//! Full-batch gradient descent.
//!
//! Two step-size rules are available. `Constant` is plain GD with a fixed
//! learning rate. `Curvature` sets every step to `fraction / lambda`, where
//! `lambda` is the top eigenvalue of the Gauss-Newton matrix `J^T J / n`,
//! tracked by power iteration with one Jacobian-vector product per step.
//! A scalar step size only reparametrizes time along the gradient-flow path,
//! so both rules approximate the same trajectory.
//! The probe is refined with extra iterations at step 0 and whenever the
//! loss goes up.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{half_mse, relu_mask, Dataset, ForwardCache, Network};
use crate::error::{Error, Result};
use crate::linalg::{add_atb, matmul, mul_ab_prefix, mul_abt, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Constant { lr: f64 },
    Curvature { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub step: StepSize,
    pub max_steps: usize,
    /// stop once loss <= rel_loss_target * initial loss
    pub rel_loss_target: f64,
    /// declare divergence once loss > divergence_cap * initial loss
    pub divergence_cap: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            step: StepSize::Curvature { fraction: 1.0 },
            max_steps: 100_000,
            rel_loss_target: 1e-3,
            divergence_cap: 1e4,
        }
    }
}

impl Schedule {
    pub fn constant(lr: f64) -> Self {
        Schedule {
            step: StepSize::Constant { lr },
            ..Schedule::default()
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_target(mut self, rel_loss_target: f64) -> Self {
        self.rel_loss_target = rel_loss_target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.step {
            StepSize::Constant { lr } if !(lr.is_finite() && lr > 0.0) => {
                return Err(Error::InvalidConfig(format!("learning rate must be positive, got {lr}")))
            }
            StepSize::Curvature { fraction } if !(fraction.is_finite() && fraction > 0.0) => {
                return Err(Error::InvalidConfig(format!(
                    "curvature fraction must be positive, got {fraction}"
                )))
            }
            _ => {}
        }
        if !(self.rel_loss_target >= 0.0 && self.rel_loss_target < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rel_loss_target must lie in [0, 1), got {}",
                self.rel_loss_target
            )));
        }
        if !(self.divergence_cap > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "divergence_cap must exceed 1, got {}",
                self.divergence_cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxSteps,
    Diverged,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxSteps => "max_steps",
            StopReason::Diverged => "diverged",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    /// (step, loss) for every step, the final state included
    pub loss_curve: Vec<(usize, f64)>,
    /// step size used at each step
    pub step_sizes: Vec<f64>,
    pub initial_snapshot: Network,
    pub final_snapshot: Network,
    pub steps_taken: usize,
    pub stop_reason: StopReason,
    pub schedule: Schedule,
    /// the only field that differs between identical runs
    pub wall_clock_secs: f64,
}

impl TrainRecord {
    pub fn initial_loss(&self) -> f64 {
        self.loss_curve[0].1
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_curve.last().map_or(f64::NAN, |p| p.1)
    }
}

const WARMUP_ITERS: usize = 20;
const REFINE_ITERS: usize = 5;

/// Trains an owned copy of `net` on `data`.
///
/// A step is taken only while the loss is above the target, below the
/// divergence cap and the step budget lasts, so `max_steps = 0` returns the
/// initial network untouched and a zero initial loss converges at step 0.
pub fn train(net: Network, data: &Dataset, schedule: &Schedule) -> Result<TrainRecord> {
    schedule.validate()?;
    net.check()?;
    if data.input_dim() != net.input_dim() || data.output_dim() != net.output_dim() {
        return Err(Error::Dimension(format!(
            "dataset is {}->{}, network is {}->{}",
            data.input_dim(),
            data.output_dim(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    let started = Instant::now();
    let initial = net.clone();
    let mut gd = Descent::new(net, data)?;

    let mut loss_curve = Vec::new();
    let mut step_sizes = Vec::new();
    let mut loss0 = f64::NAN;
    let mut prev = f64::INFINITY;
    let mut step = 0;
    let stop_reason = loop {
        let l = half_mse(&gd.cache.f, data.y());
        loss_curve.push((step, l));
        if step == 0 {
            loss0 = l;
        }
        if !l.is_finite() || !gd.net.is_finite() || l > schedule.divergence_cap * loss0 {
            break StopReason::Diverged;
        }
        if l <= schedule.rel_loss_target * loss0 {
            break StopReason::Converged;
        }
        if step >= schedule.max_steps {
            break StopReason::MaxSteps;
        }
        let lr = match schedule.step {
            StepSize::Constant { lr } => {
                gd.step(lr);
                lr
            }
            StepSize::Curvature { fraction } => {
                if step == 0 {
                    gd.refine(WARMUP_ITERS);
                } else if l > prev {
                    gd.refine(REFINE_ITERS);
                }
                match gd.step_adaptive(fraction) {
                    Some(lr) => lr,
                    // J = 0, so the gradient vanishes too
                    None => break StopReason::MaxSteps,
                }
            }
        };
        step_sizes.push(lr);
        prev = l;
        step += 1;
    };

    Ok(TrainRecord {
        loss_curve,
        step_sizes,
        initial_snapshot: initial,
        final_snapshot: gd.net,
        steps_taken: step,
        stop_reason,
        schedule: *schedule,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Training state: the network, its activations on the data and the
/// power-iteration probe.
struct Descent {
    net: Network,
    cache: ForwardCache,
    y: Matrix,
    n: usize,
    /// X~ X~^T, fixed for the whole run
    k_x: Matrix,
    /// unit-norm power-iteration probe, n x d_out
    probe: Matrix,
    /// latest estimate of the top Gauss-Newton eigenvalue
    lambda: f64,
}

impl Descent {
    fn new(net: Network, data: &Dataset) -> Result<Self> {
        let mut cache = ForwardCache::for_inputs(&net, data.x())?;
        cache.run(&net);
        let n = data.len();
        let mut k_x = Matrix::zeros(n, n);
        mul_abt(&cache.xt, &cache.xt, &mut k_x);
        let o = net.output_dim();
        let mut probe = Matrix::from_vec(
            n,
            o,
            (0..n * o)
                .map(|k| 1.0 + (k as f64 * 0.618_033_988_749_895).fract())
                .collect(),
        );
        probe.scale(1.0 / probe.frobenius_norm());
        Ok(Descent {
            net,
            cache,
            y: data.y().clone(),
            n,
            k_x,
            probe,
            lambda: 0.0,
        })
    }

    fn residual(&self) -> Matrix {
        let mut e = self.cache.f.clone();
        e.add_scaled(-1.0, &self.y);
        e.scale(1.0 / self.n as f64);
        e
    }

    /// Back-propagates a stack of output cotangents (blocks of n rows) to the
    /// pre-activations of both hidden layers with a single pass over W2.
    fn backprop(&self, s: &Matrix) -> (Matrix, Matrix) {
        let m = self.net.width();
        let mut d2 = matmul(s, &self.net.a);
        d2.scale(1.0 / self.net.alpha);
        mask_blocks(&mut d2, &self.cache.z2);
        let mut d1 = Matrix::zeros(s.rows(), m);
        mul_ab_prefix(&d2, &self.net.w2, m, &mut d1);
        mask_blocks(&mut d1, &self.cache.z1);
        (d2, d1)
    }

    /// First-layer tangent `(X~ X~^T d1v) * relu'(Z1)` of the probe.
    fn first_tangent(&self, d1v: &Matrix) -> Matrix {
        let mut zdot1 = matmul(&self.k_x, d1v);
        relu_mask(&mut zdot1, &self.cache.z1);
        zdot1
    }

    fn set_probe(&mut self, jjt_v: Matrix) {
        let norm = jjt_v.frobenius_norm();
        self.lambda = norm / self.n as f64;
        if norm > 0.0 && norm.is_finite() {
            self.probe = jjt_v.scaled(1.0 / norm);
        }
    }

    /// Power iterations at the current parameters.
    fn refine(&mut self, iters: usize) {
        let m = self.net.width();
        for _ in 0..iters {
            let (d2v, d1v) = self.backprop(&self.probe);
            let zdot1 = self.first_tangent(&d1v);
            let mut zdot2 = Matrix::zeros(self.n, m);
            mul_abt(&zdot1, &self.net.w2, &mut zdot2);
            let c = &self.cache;
            let out = finish_jjt(zdot2, &self.probe, &d2v, &c.ht, &c.g, &c.z2, &self.net.a, self.net.alpha);
            self.set_probe(out);
        }
    }

    /// Plain gradient step of size `lr`.
    fn step(&mut self, lr: f64) {
        let e = self.residual();
        let (d2, d1) = self.backprop(&e);
        self.apply(lr, &e, &d2, &d1);
    }

    /// Advances the probe one power iteration and takes a step of
    /// `fraction / lambda`. Returns the step size, or `None` (no step) when the
    /// curvature estimate is zero.
    fn step_adaptive(&mut self, fraction: f64) -> Option<f64> {
        let n = self.n;
        let e = self.residual();
        let mut stacked = Matrix::zeros(2 * n, e.cols());
        let split = e.as_slice().len();
        stacked.as_mut_slice()[..split].copy_from_slice(e.as_slice());
        stacked.as_mut_slice()[split..].copy_from_slice(self.probe.as_slice());
        let (d2s, d1s) = self.backprop(&stacked);
        let (d2e, d2v) = split_rows(&d2s, n);
        let (d1e, d1v) = split_rows(&d1s, n);

        let zdot1 = self.first_tangent(&d1v);
        let mut zdot2 = Matrix::zeros(n, self.net.width());
        mul_abt(&zdot1, &self.net.w2, &mut zdot2);
        let c = &self.cache;
        let out = finish_jjt(zdot2, &self.probe, &d2v, &c.ht, &c.g, &c.z2, &self.net.a, self.net.alpha);
        self.set_probe(out);
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return None;
        }
        let lr = fraction / self.lambda;
        self.apply(lr, &e, &d2e, &d1e);
        Some(lr)
    }

    /// Applies the step for residual `e` and its back-propagated `d2`, `d1`,
    /// then refreshes the activations.
    fn apply(&mut self, lr: f64, e: &Matrix, d2: &Matrix, d1: &Matrix) {
        let c = &self.cache;
        add_atb(&mut self.net.a, -lr / self.net.alpha, e, &c.g);
        add_atb(&mut self.net.w2, -lr, d2, &c.ht);
        add_atb(&mut self.net.w1, -lr, d1, &c.xt);
        self.cache.run(&self.net);
    }
}

/// Completes `J J^T v` (`n` times the Gauss-Newton action on output space)
/// from `zdot1 W2^T`, all other factors taken at the same parameters.
#[allow(clippy::too_many_arguments)]
fn finish_jjt(
    mut zdot2: Matrix,
    v: &Matrix,
    d2v: &Matrix,
    ht: &Matrix,
    g: &Matrix,
    z2: &Matrix,
    a: &Matrix,
    alpha: f64,
) -> Matrix {
    let n = v.rows();
    let mut k_h = Matrix::zeros(n, n);
    mul_abt(ht, ht, &mut k_h);
    zdot2.add_scaled(1.0, &matmul(&k_h, d2v));
    relu_mask(&mut zdot2, z2);

    let mut out = Matrix::zeros(n, a.rows());
    mul_abt(&zdot2, a, &mut out);
    out.scale(1.0 / alpha);
    let mut k_g = Matrix::zeros(n, n);
    mul_abt(g, g, &mut k_g);
    out.add_scaled(1.0 / (alpha * alpha), &matmul(&k_g, v));
    out
}

/// `relu_mask` for a stack of blocks that all share the same pre-activations.
fn mask_blocks(delta: &mut Matrix, pre: &Matrix) {
    let block = pre.as_slice().len();
    for chunk in delta.as_mut_slice().chunks_mut(block) {
        for (dv, z) in chunk.iter_mut().zip(pre.as_slice()) {
            if *z <= 0.0 {
                *dv = 0.0;
            }
        }
    }
}

/// First `n` rows and the rest (possibly none).
fn split_rows(s: &Matrix, n: usize) -> (Matrix, Matrix) {
    let cols = s.cols();
    let (top, bottom) = s.as_slice().split_at(n * cols);
    (
        Matrix::from_vec(n, cols, top.to_vec()),
        Matrix::from_vec(s.rows() - n, cols, bottom.to_vec()),
    )
}

/// Top eigenvalue of the Gauss-Newton matrix `J^T J / n` at `net`, by `iters`
/// rounds of power iteration.
pub fn gauss_newton_top(net: &Network, data: &Dataset, iters: usize) -> Result<f64> {
    net.check()?;
    let mut gd = Descent::new(net.clone(), data)?;
    gd.refine(iters.max(1));
    Ok(gd.lambda)
}
