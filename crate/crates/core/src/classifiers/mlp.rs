//! Fully connected network with ReLU hidden layers and a sigmoid output,
//! trained on binary cross-entropy with Adam.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_binary, check_nonempty, ModelConfig, ModelKind, ModelParams, Penalty, TrainedModel};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::util::{self, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn glorot(inputs: usize, outputs: usize, rng: &mut util::Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(util::dot(w, x) + self.bias[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

impl MlpParams {
    pub fn new(inputs: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = util::rng(seed);
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self {
            layers: sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], &mut rng)).collect(),
        }
    }

    /// Pre-activations of every layer for one input; the last entry holds
    /// the output logit.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut input = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&input, &mut z);
            if k + 1 < self.layers.len() {
                input = z.iter().map(|v| v.max(0.0)).collect();
            }
            acts.push(z);
        }
        acts
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.forward(x).last().unwrap()[0]
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
    }
}

fn penalty_term(p: &MlpParams, penalty: Penalty, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let s: f64 = p
        .layers
        .iter()
        .flat_map(|l| &l.weights)
        .map(|w| match penalty {
            Penalty::L2 => w * w,
            Penalty::L1 => w.abs(),
        })
        .sum();
    lambda * s
}

/// Mean cross-entropy over `rows` plus the weight penalty, and its gradient
/// in [`MlpParams::to_flat`] order. Biases are not penalised.
pub fn mlp_loss_and_gradient(
    p: &MlpParams,
    rows: &[Vec<f64>],
    labels: &[u8],
    penalty: Penalty,
    lambda: f64,
) -> (f64, Vec<f64>) {
    let n = rows.len().max(1) as f64;
    let mut grads: Vec<Dense> = p
        .layers
        .iter()
        .map(|l| Dense {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.bias.len()],
        })
        .collect();
    let mut loss = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let pre = p.forward(x);
        let z = pre.last().unwrap()[0];
        loss += if y == 1 { softplus(-z) } else { softplus(z) };
        // dL/dz at the output
        let mut delta = vec![(sigmoid(z) - f64::from(y)) / n];
        for k in (0..p.layers.len()).rev() {
            let layer = &p.layers[k];
            let input: Vec<f64> = if k == 0 {
                x.clone()
            } else {
                pre[k - 1].iter().map(|v| v.max(0.0)).collect()
            };
            let g = &mut grads[k];
            for o in 0..layer.outputs {
                g.bias[o] += delta[o];
                for i in 0..layer.inputs {
                    g.weights[o * layer.inputs + i] += delta[o] * input[i];
                }
            }
            if k > 0 {
                let mut next = vec![0.0; layer.inputs];
                for (i, nx) in next.iter_mut().enumerate() {
                    if pre[k - 1][i] > 0.0 {
                        *nx = (0..layer.outputs).map(|o| delta[o] * layer.weights[o * layer.inputs + i]).sum();
                    }
                }
                delta = next;
            }
        }
    }
    if lambda != 0.0 {
        for (g, l) in grads.iter_mut().zip(&p.layers) {
            for (gw, w) in g.weights.iter_mut().zip(&l.weights) {
                *gw += match penalty {
                    Penalty::L2 => 2.0 * lambda * w,
                    Penalty::L1 => lambda * w.signum(),
                };
            }
        }
    }
    let flat = MlpParams { layers: grads }.to_flat();
    (loss / n + penalty_term(p, penalty, lambda), flat)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

pub fn train_mlp(x: &FeatureMatrix, cfg: &ModelConfig) -> Result<TrainedModel> {
    train_mlp_logged(x, cfg).map(|(m, _)| m)
}

/// Trains with seeded mini-batch Adam; also returns the full-batch loss
/// before training and after every epoch.
pub fn train_mlp_logged(x: &FeatureMatrix, cfg: &ModelConfig) -> Result<(TrainedModel, Vec<f64>)> {
    check_nonempty(x)?;
    check_binary(x)?;
    if cfg.hidden_layers.iter().any(|&h| h == 0) {
        return Err(Error::Config("hidden layer sizes must be positive".into()));
    }
    let mut params = MlpParams::new(x.n_cols(), &cfg.hidden_layers, cfg.seed);
    let mut rng = util::rng(util::mix_seed(cfg.seed, 0x4d4c50));
    let mut adam = Adam::new(params.n_params(), cfg.learning_rate);
    let mut flat = params.to_flat();
    let batch = cfg.batch_size.clamp(1, x.n_rows());
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let full_loss = |p: &MlpParams| mlp_loss_and_gradient_value(p, &x.rows, &x.labels, cfg.penalty, cfg.penalty_weight);
    let mut history = vec![full_loss(&params)];

    let mut rows_buf: Vec<Vec<f64>> = Vec::with_capacity(batch);
    let mut labels_buf: Vec<u8> = Vec::with_capacity(batch);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            rows_buf.clear();
            labels_buf.clear();
            rows_buf.extend(chunk.iter().map(|&i| x.rows[i].clone()));
            labels_buf.extend(chunk.iter().map(|&i| x.labels[i]));
            let (_, grad) = mlp_loss_and_gradient(&params, &rows_buf, &labels_buf, cfg.penalty, cfg.penalty_weight);
            adam.step(&mut flat, &grad);
            params.set_flat(&flat);
        }
        let loss = full_loss(&params);
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("MLP loss became {loss} in epoch {epoch}")));
        }
        history.push(loss);
    }
    Ok((
        TrainedModel {
            kind: ModelKind::Mlp,
            config: cfg.clone(),
            feature_columns: x.column_names.clone(),
            params: ModelParams::Mlp(params),
        },
        history,
    ))
}

fn mlp_loss_and_gradient_value(p: &MlpParams, rows: &[Vec<f64>], labels: &[u8], penalty: Penalty, lambda: f64) -> f64 {
    let n = rows.len().max(1) as f64;
    let loss: f64 = rows
        .iter()
        .zip(labels)
        .map(|(r, &y)| {
            let z = p.logit(r);
            if y == 1 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    loss / n + penalty_term(p, penalty, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetKind, Partition};

    #[test]
    fn init_is_bounded_and_nonzero() {
        let p = MlpParams::new(5, &[16, 8], 1);
        for l in &p.layers {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= limit));
            assert!(l.weights.iter().any(|&w| w != 0.0));
        }
        assert_eq!(p.layers.len(), 3);
    }

    #[test]
    fn xor_is_learned() {
        let x = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
            DatasetKind::Baseline,
            Partition::Train,
        )
        .unwrap();
        let cfg = ModelConfig {
            hidden_layers: vec![4, 2],
            learning_rate: 0.05,
            epochs: 2000,
            batch_size: 4,
            penalty_weight: 0.0,
            seed: 1,
            ..ModelConfig::default()
        };
        let m = train_mlp(&x, &cfg).unwrap();
        assert_eq!(m.predict(&x).unwrap(), x.labels);
    }
}
