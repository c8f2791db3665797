//! Binary classifiers behind a common train/score contract.
//!
//! Every model is trained on a [`FeatureMatrix`] and remembers its column
//! order; scoring a matrix with different columns is a schema error.
//! Logistic regression, random forest and the MLP produce probabilities in
//! `[0, 1]`; the SVM produces a signed margin.

mod forest;
mod logreg;
mod mlp;
mod svm;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::util;

pub use forest::{train_random_forest, Forest};
pub use logreg::{logreg_gradient, logreg_objective, train_logreg, train_logreg_logged, LogRegParams};
pub use mlp::{mlp_loss_and_gradient, train_mlp, train_mlp_logged, Dense, MlpParams};
pub use svm::{dual_objective, kernel_value, smo_solve, train_svm, SmoSolution, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logreg,
    RandomForest,
    Svm,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Logreg, ModelKind::RandomForest, ModelKind::Svm, ModelKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ModelKind::Logreg),
            "random_forest" | "rf" => Ok(ModelKind::RandomForest),
            "svm" => Ok(ModelKind::Svm),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Gaussian,
    Polynomial,
}

/// Hyperparameters shared by all model kinds; each model reads the fields
/// that apply to it.
///
/// `penalty_weight` multiplies the penalty term added to the mean training
/// loss, so larger values regularise more. For the SVM this means the
/// objective `mean hinge + (λ/2)·‖w‖²`, i.e. a per-sample box bound
/// `C = 1 / (λ n)` in the dual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub penalty: Penalty,
    pub penalty_weight: f64,
    pub kernel: Kernel,
    /// `None` selects `1 / (n_features · mean column variance)`.
    pub kernel_gamma: Option<f64>,
    pub polynomial_degree: u32,
    pub trees: usize,
    /// Grow each tree on a bootstrap resample rather than on all rows.
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub hidden_layers: Vec<usize>,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// SMO stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::L2,
            penalty_weight: 1.0,
            kernel: Kernel::Linear,
            kernel_gamma: None,
            polynomial_degree: 3,
            trees: 100,
            bootstrap: true,
            max_depth: None,
            hidden_layers: vec![16, 8],
            seed: 0,
            learning_rate: 1.0,
            epochs: 1000,
            batch_size: 32,
            tolerance: 1e-4,
            max_iterations: 10_000_000,
        }
    }
}

/// Named presets selectable from the pipeline config.
pub const PRESET_NAMES: [&str; 7] = [
    "logreg-baseline",
    "logreg-topological",
    "logreg-embedding",
    "svm-linear",
    "svm-gaussian",
    "rf-default",
    "mlp-default",
];

pub fn preset(name: &str) -> Result<(ModelKind, ModelConfig)> {
    let base = ModelConfig::default();
    let svm = ModelConfig {
        penalty: Penalty::L2,
        penalty_weight: 1e-3,
        ..base.clone()
    };
    Ok(match name {
        "logreg-baseline" => (ModelKind::Logreg, base),
        "logreg-topological" => (
            ModelKind::Logreg,
            ModelConfig {
                penalty: Penalty::L1,
                penalty_weight: 1.0 / 1000.0,
                ..base
            },
        ),
        "logreg-embedding" => (
            ModelKind::Logreg,
            ModelConfig {
                penalty: Penalty::L1,
                penalty_weight: 1.0 / 150.0,
                ..base
            },
        ),
        "svm-linear" => (ModelKind::Svm, svm),
        "svm-gaussian" => (
            ModelKind::Svm,
            ModelConfig {
                kernel: Kernel::Gaussian,
                ..svm
            },
        ),
        "rf-default" => (ModelKind::RandomForest, base),
        "mlp-default" => (
            ModelKind::Mlp,
            ModelConfig {
                penalty: Penalty::L2,
                penalty_weight: 1e-4,
                learning_rate: 1e-3,
                epochs: 200,
                ..base
            },
        ),
        other => return Err(Error::Config(format!("unknown model preset `{other}`"))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Logreg(LogRegParams),
    RandomForest(Forest),
    Svm(SvmParams),
    Mlp(MlpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub feature_columns: Vec<String>,
    pub params: ModelParams,
}

pub(crate) fn check_binary(x: &FeatureMatrix) -> Result<()> {
    if let Some(bad) = x.labels.iter().find(|&&l| l > 1) {
        return Err(Error::Domain(format!("label {bad} is not binary")));
    }
    Ok(())
}

pub(crate) fn check_nonempty(x: &FeatureMatrix) -> Result<()> {
    if x.is_empty() || x.n_cols() == 0 {
        return Err(Error::Domain("cannot train on an empty matrix".into()));
    }
    Ok(())
}

/// Trains a model of the given kind.
pub fn train(kind: ModelKind, x: &FeatureMatrix, cfg: &ModelConfig) -> Result<TrainedModel> {
    match kind {
        ModelKind::Logreg => train_logreg(x, cfg),
        ModelKind::RandomForest => train_random_forest(x, cfg),
        ModelKind::Svm => train_svm(x, cfg),
        ModelKind::Mlp => train_mlp(x, cfg),
    }
}

impl TrainedModel {
    /// Decision threshold for [`TrainedModel::predict`].
    pub fn threshold(&self) -> f64 {
        match self.kind {
            ModelKind::Svm => 0.0,
            _ => 0.5,
        }
    }

    fn check_schema(&self, x: &FeatureMatrix) -> Result<()> {
        if x.column_names == self.feature_columns {
            return Ok(());
        }
        let missing: Vec<&String> = self.feature_columns.iter().filter(|c| !x.column_names.contains(c)).collect();
        let extra: Vec<&String> = x.column_names.iter().filter(|c| !self.feature_columns.contains(c)).collect();
        let misplaced: Vec<&String> = x
            .column_names
            .iter()
            .zip(&self.feature_columns)
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a)
            .filter(|a| self.feature_columns.contains(a))
            .collect();
        Err(Error::Schema(format!(
            "column mismatch: missing {missing:?}, unexpected {extra:?}, out of order {misplaced:?}"
        )))
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Logreg(p) => p.score(row),
            ModelParams::RandomForest(f) => f.score(row),
            ModelParams::Svm(s) => s.decision(row),
            ModelParams::Mlp(m) => m.score(row),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        let t = self.threshold();
        Ok(score(self, x)?.into_iter().map(|s| u8::from(s >= t)).collect())
    }

    /// Per-feature impurity importances; only random forests have them.
    pub fn importances(&self) -> Option<&[f64]> {
        match &self.params {
            ModelParams::RandomForest(f) => Some(&f.importances),
            _ => None,
        }
    }

    /// Primal weights of a linear-kernel SVM or a logistic regression.
    pub fn linear_weights(&self) -> Option<&[f64]> {
        match &self.params {
            ModelParams::Svm(s) => s.primal_weights.as_deref(),
            ModelParams::Logreg(p) => Some(&p.weights),
            _ => None,
        }
    }
}

/// One finite score per row of `x`.
pub fn score(model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.check_schema(x)?;
    let scores: Vec<f64> = x.rows.iter().map(|r| model.score_row(r)).collect();
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite score for row {i}")));
    }
    Ok(scores)
}

const MODEL_MAGIC: &[u8; 8] = b"LPMODEL\n";
pub const MODEL_FORMAT_VERSION: u32 = 1;

impl TrainedModel {
    /// Binary container: magic, little-endian format version, then the
    /// self-describing JSON encoding of the model.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body = serde_json::to_vec(self).map_err(|e| Error::Serde(e.to_string()))?;
        let mut out = Vec::with_capacity(body.len() + 12);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MODEL_MAGIC {
            return Err(Error::Serde("not a model file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "model format version {version} is not supported (expected {MODEL_FORMAT_VERSION})"
            )));
        }
        serde_json::from_slice(&bytes[12..]).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_file(path, self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Dependency(path.to_path_buf()));
        }
        Self::from_bytes(&util::read_bytes(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetKind, Partition};

    fn matrix(cols: &[&str], rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
        FeatureMatrix::new(
            cols.iter().map(|c| c.to_string()).collect(),
            rows,
            labels,
            DatasetKind::Baseline,
            Partition::Train,
        )
        .unwrap()
    }

    fn toy() -> FeatureMatrix {
        matrix(
            &["a", "b"],
            vec![vec![-1.0, 0.5], vec![-0.5, -1.0], vec![1.0, 0.2], vec![0.7, 1.0]],
            vec![0, 0, 1, 1],
        )
    }

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            preset(name).unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn score_contract() {
        for name in PRESET_NAMES {
            let (kind, mut cfg) = preset(name).unwrap();
            cfg.trees = 5;
            cfg.epochs = cfg.epochs.min(50);
            let m = train(kind, &toy(), &cfg).unwrap();
            let empty = matrix(&["a", "b"], vec![], vec![]);
            assert!(score(&m, &empty).unwrap().is_empty());
            let s1 = score(&m, &toy()).unwrap();
            assert_eq!(s1, score(&m, &toy()).unwrap());
            if kind != ModelKind::Svm {
                assert!(s1.iter().all(|s| (0.0..=1.0).contains(s)));
            }
            let permuted = toy().select_columns(&["b", "a"]).unwrap();
            match score(&m, &permuted) {
                Err(Error::Schema(msg)) => assert!(msg.contains("out of order")),
                other => panic!("expected schema error, got {other:?}"),
            }
        }
    }

    #[test]
    fn serialization_round_trip_and_version_check() {
        let (kind, cfg) = preset("svm-gaussian").unwrap();
        let m = train(kind, &toy(), &cfg).unwrap();
        let bytes = m.to_bytes().unwrap();
        let back = TrainedModel::from_bytes(&bytes).unwrap();
        assert_eq!(score(&back, &toy()).unwrap(), score(&m, &toy()).unwrap());
        let mut wrong = bytes.clone();
        wrong[8] = 99;
        assert!(matches!(TrainedModel::from_bytes(&wrong), Err(Error::Serde(_))));
    }

    #[test]
    fn non_binary_labels_rejected() {
        let bad = matrix(&["a"], vec![vec![0.0], vec![1.0]], vec![0, 2]);
        assert!(matches!(train(ModelKind::Logreg, &bad, &ModelConfig::default()), Err(Error::Domain(_))));
    }
}
