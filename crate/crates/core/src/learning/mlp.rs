use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RegressionTask;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// `x -> tanh(w2 . relu(w1 x + b1) + b2)`; parameters packed as `[w1, b1, w2, b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights
    /// and biases of both layers.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = crate::seed::rng(seed, &[0x3a1b]);
        let b2 = 1.0 / (hidden as f64).sqrt();
        let mut params = Vec::with_capacity(3 * hidden + 1);
        params.extend((0..2 * hidden).map(|_| rng.random_range(-1.0..1.0)));
        params.extend((0..=hidden).map(|_| rng.random_range(-b2..b2)));
        Self { hidden, params }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let h = self.hidden;
        let (w1, rest) = self.params.split_at(h);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        x.iter()
            .map(|&xi| {
                let z: f64 = (0..h).map(|k| w2[k] * (w1[k] * xi + b1[k]).max(0.0)).sum::<f64>() + b2[0];
                z.tanh()
            })
            .collect()
    }

    /// `scale * mean (f(x_i) - y_i)^2` and its gradient in packed layout.
    pub fn loss_and_grad(&self, x: &[f64], y: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let h = self.hidden;
        let (w1, rest) = self.params.split_at(h);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (gw1, grest) = grad.split_at_mut(h);
        let (gb1, grest) = grest.split_at_mut(h);
        let (gw2, gb2) = grest.split_at_mut(h);
        let n = x.len() as f64;
        let mut loss = 0.0;
        let mut act = vec![0.0; h];
        for (&xi, &yi) in x.iter().zip(y) {
            let mut z = b2[0];
            for k in 0..h {
                act[k] = (w1[k] * xi + b1[k]).max(0.0);
                z += w2[k] * act[k];
            }
            let p = z.tanh();
            let r = p - yi;
            loss += r * r;
            let dz = 2.0 * scale / n * r * (1.0 - p * p);
            gb2[0] += dz;
            for k in 0..h {
                gw2[k] += dz * act[k];
                if act[k] > 0.0 {
                    let da = dz * w2[k];
                    gw1[k] += da * xi;
                    gb1[k] += da;
                }
            }
        }
        scale * loss / n
    }
}

/// Full-batch Adam on `scale * MSE`; returns design predictions after each requested
/// step count (ascending, 0 allowed) from a single training run.
pub fn mlp_checkpoints(
    task: &RegressionTask,
    sample: &[f64],
    config: &MlpConfig,
    checkpoints: &[usize],
    scale: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if sample.len() != task.n() {
        return Err(Error::Shape(format!("sample has {} responses, design has {}", sample.len(), task.n())));
    }
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("checkpoints must be ascending".into()));
    }
    if config.hidden == 0 || !(config.lr > 0.0) {
        return Err(Error::Invalid("mlp needs hidden > 0 and lr > 0".into()));
    }
    let mut net = Mlp::init(config.hidden, seed);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let take = |net: &Mlp, out: &mut Vec<Vec<f64>>, next: &mut usize, step: usize| {
        while *next < checkpoints.len() && checkpoints[*next] == step {
            out.push(net.predict(&task.design));
            *next += 1;
        }
    };
    take(&net, &mut out, &mut next, 0);
    let Some(&last) = checkpoints.last() else {
        return Ok(out);
    };
    // zero loss gives zero gradients and Adam leaves the parameters in place
    if scale == 0.0 {
        let p = net.predict(&task.design);
        out.resize(checkpoints.len(), p);
        return Ok(out);
    }
    let np = net.params.len();
    let (mut m, mut v, mut g) = (vec![0.0; np], vec![0.0; np], vec![0.0; np]);
    let (mut p1, mut p2) = (1.0, 1.0);
    for step in 1..=last {
        let loss = net.loss_and_grad(&task.design, sample, scale, &mut g);
        if !loss.is_finite() {
            return Err(Error::numeric("mlp_fit", format!("loss diverged at step {step}")));
        }
        p1 *= config.beta1;
        p2 *= config.beta2;
        for i in 0..np {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let mh = m[i] / (1.0 - p1);
            let vh = v[i] / (1.0 - p2);
            net.params[i] -= config.lr * mh / (vh.sqrt() + config.eps);
        }
        take(&net, &mut out, &mut next, step);
    }
    Ok(out)
}

/// Design predictions after `steps` Adam updates.
pub fn mlp_fit(task: &RegressionTask, sample: &[f64], config: &MlpConfig, steps: usize, seed: u64) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Invalid("steps must be at least 1".into()));
    }
    Ok(mlp_checkpoints(task, sample, config, &[steps], 1.0, seed)?.remove(0))
}
