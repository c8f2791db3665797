//! Feature selection: recursive elimination driven by a linear SVM with
//! cross-validated subset choice, forest importances, and correlation
//! matrices.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{score, train, train_random_forest, Kernel, ModelConfig, ModelKind};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::evaluation::auroc;
use crate::util;

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// All columns, last eliminated first.
    pub ranking: Vec<String>,
    /// Retained columns, in input order.
    pub selected: Vec<String>,
    /// `(subset size, mean CV AUROC)`, largest subset first.
    pub cv_scores: Vec<(usize, f64)>,
    pub folds: usize,
}

impl SelectionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,selected\n");
        for (i, f) in self.ranking.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, f, u8::from(self.selected.contains(f)));
        }
        out
    }

    pub fn cv_csv(&self) -> String {
        let mut out = String::from("n_features,mean_auroc\n");
        for (k, s) in &self.cv_scores {
            let _ = writeln!(out, "{k},{s}");
        }
        out
    }
}

/// Linear SVM used to rank and score subsets.
pub fn selection_svm_config(seed: u64) -> ModelConfig {
    ModelConfig {
        kernel: Kernel::Linear,
        penalty_weight: 1e-3,
        seed,
        ..ModelConfig::default()
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = util::rng(seed);
    let mut assignment = vec![0; labels.len()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < folds {
            return Err(Error::Stratification(format!(
                "class {class} has {} rows, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    Ok(assignment)
}

fn cv_auroc(x: &FeatureMatrix, assignment: &[usize], folds: usize, cfg: &ModelConfig) -> Result<f64> {
    let per_fold = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..x.n_rows()).partition(|&i| assignment[i] == f);
            let (tr, te) = (x.select_rows(&train_idx), x.select_rows(&test_idx));
            for (part, m) in [("train", &tr), ("test", &te)] {
                if m.labels.iter().all(|&l| l == m.labels[0]) {
                    return Err(Error::Stratification(format!("fold {f} {part} part has a single class")));
                }
            }
            let model = train(ModelKind::Svm, &tr, cfg)?;
            auroc(&score(&model, &te)?, &te.labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(util::mean(&per_fold))
}

/// Recursive feature elimination with cross-validation using the default
/// linear SVM.
pub fn rfecv(x: &FeatureMatrix, folds: usize, seed: u64) -> Result<SelectionReport> {
    rfecv_with(x, folds, seed, &selection_svm_config(seed))
}

/// Recursive feature elimination with cross-validation.
///
/// One column is removed per round: the one with the smallest absolute
/// weight in a linear SVM fitted on all rows. Every subset in the sequence is
/// scored by stratified k-fold AUROC, and the best subset is kept, preferring
/// fewer columns on ties. Columns are processed in name order, so the result
/// does not depend on the input column order.
pub fn rfecv_with(x: &FeatureMatrix, folds: usize, seed: u64, cfg: &ModelConfig) -> Result<SelectionReport> {
    if x.n_cols() < 2 {
        return Err(Error::Domain("feature elimination needs at least 2 columns".into()));
    }
    if cfg.kernel != Kernel::Linear {
        return Err(Error::Config("feature elimination needs a linear kernel".into()));
    }
    let assignment = stratified_folds(&x.labels, folds, seed)?;
    let mut current: Vec<String> = x.column_names.clone();
    current.sort();
    let mut eliminated: Vec<String> = Vec::new();
    let mut cv_scores = Vec::new();
    let mut subsets = Vec::new();
    loop {
        let sub = x.select_columns(&current)?;
        let cv = cv_auroc(&sub, &assignment, folds, cfg)?;
        log::debug!("rfecv: {} columns, mean AUROC {cv:.4}", current.len());
        cv_scores.push((current.len(), cv));
        subsets.push(current.clone());
        if current.len() == 1 {
            break;
        }
        let model = train(ModelKind::Svm, &sub, cfg)?;
        let w = model.linear_weights().expect("linear SVM has primal weights");
        let weakest = (0..w.len())
            .min_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()))
            .unwrap();
        eliminated.push(current.remove(weakest));
    }
    eliminated.push(current.pop().unwrap());
    eliminated.reverse();

    let mut best = 0;
    for (i, &(_, s)) in cv_scores.iter().enumerate() {
        if s >= cv_scores[best].1 - 1e-12 {
            best = i;
        }
    }
    let keep = &subsets[best];
    Ok(SelectionReport {
        ranking: eliminated,
        selected: x.column_names.iter().filter(|c| keep.contains(c)).cloned().collect(),
        cv_scores,
        folds,
    })
}

/// Forest impurity importances paired with column names, in column order.
pub fn rf_importance(x: &FeatureMatrix, cfg: &ModelConfig) -> Result<Vec<(String, f64)>> {
    let model = train_random_forest(x, cfg)?;
    let imp = model.importances().expect("forest has importances");
    Ok(x.column_names.iter().cloned().zip(imp.iter().copied()).collect())
}

/// `feature,importance` rows, most important first.
pub fn importance_csv(importances: &[(String, f64)]) -> String {
    let mut sorted = importances.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = String::from("feature,importance\n");
    for (f, v) in sorted {
        let _ = writeln!(out, "{f},{v}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// Feature columns followed by `label`.
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            out.push_str(n);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson correlations among all columns and the label. A zero-variance
/// column correlates 0 with everything else.
pub fn correlation_matrix(x: &FeatureMatrix) -> Result<CorrelationMatrix> {
    if x.n_rows() < 2 {
        return Err(Error::Domain("correlation needs at least 2 rows".into()));
    }
    let mut names = x.column_names.clone();
    names.push("label".into());
    let mut cols: Vec<Vec<f64>> = (0..x.n_cols()).map(|j| x.column(j)).collect();
    cols.push(x.labels.iter().map(|&l| f64::from(l)).collect());
    let centred: Vec<(Vec<f64>, f64)> = cols
        .iter()
        .zip(&names)
        .map(|(c, name)| {
            let m = util::mean(c);
            let d: Vec<f64> = c.iter().map(|v| v - m).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                log::warn!("column `{name}` has zero variance; its correlations are set to 0");
            }
            (d, norm)
        })
        .collect();
    let k = names.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let (a, na) = &centred[i];
            let (b, nb) = &centred[j];
            let r = if *na == 0.0 || *nb == 0.0 {
                0.0
            } else {
                (util::dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { names, values })
}
