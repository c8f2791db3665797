//! Random forest of CART trees with Gini splits.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_binary, check_nonempty, ModelConfig, ModelKind, ModelParams, TrainedModel};
use crate::dataset::FeatureMatrix;
use crate::error::Result;
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        positive_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn score(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive_fraction } => return positive_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    /// Mean impurity decrease per feature, normalised to sum to 1.
    pub importances: Vec<f64>,
}

impl Forest {
    /// Mean positive-class fraction of the reached leaves.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [u8],
    max_features: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut util::Rng) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positive_fraction: pos as f64 / n as f64,
        });
        let depth_ok = self.max_depth.is_none_or(|d| depth < d);
        if pos == 0 || pos == n || n < 2 || !depth_ok {
            return slot;
        }
        let Some(best) = self.best_split(&idx, pos, rng) else {
            return slot;
        };
        self.importance[best.feature] += best.decrease;
        let left = self.grow(best.left, depth + 1, rng);
        let right = self.grow(best.right, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }

    /// Examines features in random order until `max_features` non-constant
    /// ones have been tried.
    fn best_split(&self, idx: &[usize], pos: usize, rng: &mut util::Rng) -> Option<BestSplit> {
        let n = idx.len();
        let parent = n as f64 * gini(pos, n);
        let d = self.rows[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let mut tried = 0;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for f in features {
            if tried == self.max_features {
                break;
            }
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            let first = self.rows[order[0]][f];
            let last = self.rows[order[n - 1]][f];
            if first == last {
                continue;
            }
            tried += 1;
            let mut left_pos = 0;
            for k in 0..n - 1 {
                left_pos += usize::from(self.labels[order[k]] == 1);
                let (a, b) = (self.rows[order[k]][f], self.rows[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let child = nl as f64 * gini(left_pos, nl) + (n - nl) as f64 * gini(pos - left_pos, n - nl);
                let decrease = parent - child;
                if best.is_none_or(|(_, _, d)| decrease > d) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some((f, threshold, decrease));
                }
            }
        }
        let (feature, threshold, decrease) = best?;
        if decrease <= 1e-12 {
            return None;
        }
        let (left, right) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
        Some(BestSplit {
            feature,
            threshold,
            decrease,
            left,
            right,
        })
    }
}

/// Bootstrap-aggregated CART trees; `√d` candidate features per split.
///
/// Trees are grown in parallel, each from its own RNG stream derived from
/// `cfg.seed`.
pub fn train_random_forest(x: &FeatureMatrix, cfg: &ModelConfig) -> Result<TrainedModel> {
    check_nonempty(x)?;
    check_binary(x)?;
    let (n, d) = (x.n_rows(), x.n_cols());
    let max_features = ((d as f64).sqrt().floor() as usize).max(1);
    let trees_out: Vec<(Tree, Vec<f64>)> = (0..cfg.trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = util::rng(util::mix_seed(cfg.seed, t as u64));
            let sample: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                rows: &x.rows,
                labels: &x.labels,
                max_features,
                max_depth: cfg.max_depth,
                nodes: Vec::new(),
                importance: vec![0.0; d],
            };
            b.grow(sample, 0, &mut rng);
            let total: f64 = b.importance.iter().sum();
            if total > 0.0 {
                b.importance.iter_mut().for_each(|v| *v /= total);
            }
            (Tree { nodes: b.nodes }, b.importance)
        })
        .collect();

    let mut importances = vec![0.0; d];
    for (_, imp) in &trees_out {
        for (a, v) in importances.iter_mut().zip(imp) {
            *a += v;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    } else {
        // no tree found any split
        importances.iter_mut().for_each(|v| *v = 1.0 / d as f64);
    }
    Ok(TrainedModel {
        kind: ModelKind::RandomForest,
        config: cfg.clone(),
        feature_columns: x.column_names.clone(),
        params: ModelParams::RandomForest(Forest {
            trees: trees_out.into_iter().map(|(t, _)| t).collect(),
            importances,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetKind, Partition};
    use crate::error::Error;

    fn threshold_data() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 4.0]).collect();
        let labels = (0..40).map(|i| u8::from(i >= 17)).collect();
        FeatureMatrix::new(vec!["x".into()], rows, labels, DatasetKind::Baseline, Partition::Train).unwrap()
    }

    #[test]
    fn single_tree_fits_threshold() {
        let x = threshold_data();
        let cfg = ModelConfig { trees: 1, bootstrap: false, seed: 3, ..ModelConfig::default() };
        let m = train_random_forest(&x, &cfg).unwrap();
        assert_eq!(m.predict(&x).unwrap(), x.labels);
        let bagged = ModelConfig { trees: 25, bootstrap: true, ..cfg };
        let m = train_random_forest(&x, &bagged).unwrap();
        assert_eq!(m.predict(&x).unwrap(), x.labels);
    }

    #[test]
    fn planted_signal_dominates_importance() {
        let mut rng = util::rng(9);
        let labels: Vec<u8> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        let rows = labels
            .iter()
            .map(|&y| vec![rng.random::<f64>(), f64::from(y), rng.random::<f64>()])
            .collect();
        let x = FeatureMatrix::new(
            vec!["n1".into(), "signal".into(), "n2".into()],
            rows,
            labels,
            DatasetKind::Baseline,
            Partition::Train,
        )
        .unwrap();
        let m = train_random_forest(&x, &ModelConfig { trees: 50, ..ModelConfig::default() }).unwrap();
        let imp = m.importances().unwrap();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(imp.iter().all(|&v| v >= 0.0));
        assert!(imp[1] > 0.9, "{imp:?}");
    }

    #[test]
    fn empty_rejected() {
        let x = FeatureMatrix::new(vec!["x".into()], vec![], vec![], DatasetKind::Baseline, Partition::Train).unwrap();
        assert!(matches!(train_random_forest(&x, &ModelConfig::default()), Err(Error::Domain(_))));
    }
}
