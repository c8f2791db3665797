//! Ranking and threshold metrics, and a Fisher LDA separability probe.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::classifiers::{score, ModelKind, TrainedModel};
use crate::dataset::{DatasetKind, FeatureMatrix, Partition};
use crate::error::{Error, Result};
use crate::util;

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Domain(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Domain(format!("label {bad} is not binary")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Domain("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks in `O(n log n)`.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Domain(format!("score {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks are 1-based; a tie group spanning positions i..j shares rank (i+j+1)/2
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// F1 and accuracy with `score >= threshold` predicted positive. F1 is 0
/// when precision and recall are both 0.
pub fn f1_accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<(f64, f64)> {
    class_counts(scores, labels)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let f1 = if tp == 0 {
        0.0
    } else {
        let p = tp as f64 / (tp + fp) as f64;
        let r = tp as f64 / (tp + fn_) as f64;
        2.0 * p * r / (p + r)
    };
    Ok((f1, (tp + tn) as f64 / labels.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: DatasetKind,
    pub partition: Partition,
    pub model: ModelKind,
    pub auroc: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub const RESULTS_HEADER: &str = "dataset,partition,model,auroc,f1,accuracy,n_pos,n_neg";

impl EvalReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.dataset, self.partition, self.model, self.auroc, self.f1, self.accuracy, self.n_pos, self.n_neg
        )
    }
}

/// Scores `x` with `model` and reports AUROC, plus F1 and accuracy at the
/// model's own decision threshold.
pub fn evaluate(model: &TrainedModel, x: &FeatureMatrix) -> Result<EvalReport> {
    let scores = score(model, x)?;
    let (n_pos, n_neg) = class_counts(&scores, &x.labels)?;
    let (f1, accuracy) = f1_accuracy(&scores, &x.labels, model.threshold())?;
    Ok(EvalReport {
        dataset: x.kind,
        partition: x.partition,
        model: model.kind,
        auroc: auroc(&scores, &x.labels)?,
        f1,
        accuracy,
        n_pos,
        n_neg,
    })
}

pub fn results_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaProbe {
    /// Unit-norm Fisher direction.
    pub direction: Vec<f64>,
    pub threshold: f64,
    pub train_accuracy: f64,
    /// Projected coordinate and label of every sampled row.
    pub projected: Vec<(f64, u8)>,
}

impl LdaProbe {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coord,label\n");
        for (c, l) in &self.projected {
            let _ = writeln!(out, "{c},{l}");
        }
        out
    }
}

/// Fits a two-class Fisher discriminant on `sample_size` rows drawn
/// uniformly without replacement, and thresholds the projection at the
/// midpoint of the projected class means.
///
/// The within-class scatter gets a ridge of `1e-6 · trace / dims` so
/// duplicated or constant columns do not make it singular.
pub fn lda_probe(x: &FeatureMatrix, sample_size: usize, seed: u64) -> Result<LdaProbe> {
    if sample_size > x.n_rows() {
        return Err(Error::Domain(format!(
            "sample size {sample_size} exceeds the {} available rows",
            x.n_rows()
        )));
    }
    let d = x.n_cols();
    if d == 0 {
        return Err(Error::Domain("matrix has no columns".into()));
    }
    let mut rng = util::rng(seed);
    let mut picked = index::sample(&mut rng, x.n_rows(), sample_size).into_vec();
    picked.sort_unstable();
    let sample = x.select_rows(&picked);
    let pos = sample.labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == sample_size {
        return Err(Error::Domain("LDA sample must contain both classes".into()));
    }

    let mut means = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
    let mut counts = [0usize; 2];
    for (r, &l) in sample.rows.iter().zip(&sample.labels) {
        means[l as usize] += DVector::from_column_slice(r);
        counts[l as usize] += 1;
    }
    for c in 0..2 {
        means[c] /= counts[c] as f64;
    }
    let mut sw = DMatrix::<f64>::zeros(d, d);
    for (r, &l) in sample.rows.iter().zip(&sample.labels) {
        let diff = DVector::from_column_slice(r) - &means[l as usize];
        sw += &diff * diff.transpose();
    }
    let eps = 1e-6 * sw.trace() / d as f64;
    for i in 0..d {
        sw[(i, i)] += eps;
    }
    let delta = &means[1] - &means[0];
    let w = match sw.clone().cholesky() {
        Some(ch) => ch.solve(&delta),
        None => sw
            .lu()
            .solve(&delta)
            .ok_or_else(|| Error::Numeric("within-class scatter is singular".into()))?,
    };
    let norm = w.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numeric("degenerate LDA direction; class means coincide".into()));
    }
    let w = w / norm;
    let threshold = (w.dot(&means[0]) + w.dot(&means[1])) / 2.0;
    let direction: Vec<f64> = w.iter().copied().collect();
    let projected: Vec<(f64, u8)> = sample
        .rows
        .iter()
        .zip(&sample.labels)
        .map(|(r, &l)| (util::dot(&direction, r), l))
        .collect();
    let correct = projected.iter().filter(|(c, l)| u8::from(*c > threshold) == *l).count();
    Ok(LdaProbe {
        direction,
        threshold,
        train_accuracy: correct as f64 / sample_size as f64,
        projected,
    })
}
