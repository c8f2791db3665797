//! Penalised logistic regression trained by full-batch proximal gradient
//! descent.
//!
//! Objective: `mean BCE(w, b) + λ·P(w)` with `P = ‖w‖₂²` (L2) or `‖w‖₁`
//! (L1); the bias is never penalised. The L1 term is handled by
//! soft-thresholding after each gradient step, so weights can become exactly
//! zero.

use serde::{Deserialize, Serialize};

use super::{check_binary, check_nonempty, ModelConfig, ModelKind, ModelParams, Penalty, TrainedModel};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::util::{dot, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogRegParams {
    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, row) + self.bias)
    }
}

fn penalty_value(w: &[f64], penalty: Penalty, lambda: f64) -> f64 {
    lambda
        * match penalty {
            Penalty::L1 => w.iter().map(|x| x.abs()).sum::<f64>(),
            Penalty::L2 => w.iter().map(|x| x * x).sum::<f64>(),
        }
}

/// Full objective value.
pub fn logreg_objective(p: &LogRegParams, rows: &[Vec<f64>], labels: &[u8], penalty: Penalty, lambda: f64) -> f64 {
    let n = rows.len().max(1) as f64;
    let loss: f64 = rows
        .iter()
        .zip(labels)
        .map(|(r, &y)| {
            let z = dot(&p.weights, r) + p.bias;
            if y == 1 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    loss / n + penalty_value(&p.weights, penalty, lambda)
}

/// Gradient `(∂/∂w, ∂/∂b)` of the smooth part of the objective: the mean
/// cross-entropy plus, for L2, the ridge term.
pub fn logreg_gradient(
    p: &LogRegParams,
    rows: &[Vec<f64>],
    labels: &[u8],
    penalty: Penalty,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = rows.len().max(1) as f64;
    let mut gw = vec![0.0; p.weights.len()];
    let mut gb = 0.0;
    for (r, &y) in rows.iter().zip(labels) {
        let e = sigmoid(dot(&p.weights, r) + p.bias) - f64::from(y);
        gb += e;
        for (g, x) in gw.iter_mut().zip(r) {
            *g += e * x;
        }
    }
    for (g, w) in gw.iter_mut().zip(&p.weights) {
        *g /= n;
        if penalty == Penalty::L2 {
            *g += 2.0 * lambda * w;
        }
    }
    (gw, gb / n)
}

/// Upper bound on the Lipschitz constant of the smooth gradient, via power
/// iteration on `XᵀX / n` (features augmented with the bias column).
fn lipschitz_bound(rows: &[Vec<f64>], penalty: Penalty, lambda: f64) -> f64 {
    let d = rows.first().map_or(0, Vec::len) + 1;
    let n = rows.len().max(1) as f64;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut eig = 0.0;
    for _ in 0..50 {
        let mut next = vec![0.0; d];
        for r in rows {
            let s = dot(&v[..d - 1], r) + v[d - 1];
            for (nx, x) in next.iter_mut().zip(r) {
                *nx += s * x;
            }
            next[d - 1] += s;
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        eig = norm / n;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    // power iteration approaches from below
    let ridge = if penalty == Penalty::L2 { 2.0 * lambda } else { 0.0 };
    0.25 * eig * 1.05 + ridge + 1e-12
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn train_logreg(x: &FeatureMatrix, cfg: &ModelConfig) -> Result<TrainedModel> {
    train_logreg_logged(x, cfg).map(|(m, _)| m)
}

/// Trains and returns the objective value before training and after each
/// epoch (one full-batch step).
///
/// The step size is `min(learning_rate, 1/L)` with `L` the Lipschitz bound
/// of the smooth part, so every step is a descent step.
pub fn train_logreg_logged(x: &FeatureMatrix, cfg: &ModelConfig) -> Result<(TrainedModel, Vec<f64>)> {
    check_nonempty(x)?;
    check_binary(x)?;
    if !(cfg.penalty_weight >= 0.0) {
        return Err(Error::Config("penalty_weight must be non-negative".into()));
    }
    let (rows, labels, lambda) = (&x.rows, &x.labels, cfg.penalty_weight);
    let step = cfg.learning_rate.min(1.0 / lipschitz_bound(rows, cfg.penalty, lambda));
    let mut p = LogRegParams {
        weights: vec![0.0; x.n_cols()],
        bias: 0.0,
    };
    let mut history = vec![logreg_objective(&p, rows, labels, cfg.penalty, lambda)];
    for _ in 0..cfg.epochs {
        let (gw, gb) = logreg_gradient(&p, rows, labels, cfg.penalty, lambda);
        let mut max_change: f64 = 0.0;
        for (w, g) in p.weights.iter_mut().zip(&gw) {
            let mut next = *w - step * g;
            if cfg.penalty == Penalty::L1 {
                next = soft_threshold(next, step * lambda);
            }
            max_change = max_change.max((next - *w).abs());
            *w = next;
        }
        p.bias -= step * gb;
        max_change = max_change.max((step * gb).abs());
        let obj = logreg_objective(&p, rows, labels, cfg.penalty, lambda);
        if !obj.is_finite() {
            return Err(Error::Divergence("logistic regression objective is not finite".into()));
        }
        history.push(obj);
        if max_change < 1e-12 {
            break;
        }
    }
    Ok((
        TrainedModel {
            kind: ModelKind::Logreg,
            config: cfg.clone(),
            feature_columns: x.column_names.clone(),
            params: ModelParams::Logreg(p),
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetKind, Partition};

    fn one_d() -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["x".into()],
            vec![vec![-1.0], vec![1.0]],
            vec![0, 1],
            DatasetKind::Baseline,
            Partition::Train,
        )
        .unwrap()
    }

    fn weights(m: &TrainedModel) -> &LogRegParams {
        match &m.params {
            ModelParams::Logreg(p) => p,
            _ => unreachable!(),
        }
    }

    #[test]
    fn separable_direction() {
        let cfg = ModelConfig {
            penalty_weight: 1e-6,
            ..ModelConfig::default()
        };
        let m = train_logreg(&one_d(), &cfg).unwrap();
        let p = weights(&m);
        assert!(p.weights[0] > 0.0);
        assert!(p.score(&[1.0]) > 0.5 && p.score(&[-1.0]) < 0.5);
    }

    #[test]
    fn huge_l1_zeroes_weights() {
        let cfg = ModelConfig {
            penalty: Penalty::L1,
            penalty_weight: 1e6,
            ..ModelConfig::default()
        };
        let m = train_logreg(&one_d(), &cfg).unwrap();
        assert_eq!(weights(&m).weights, vec![0.0]);
    }
}
