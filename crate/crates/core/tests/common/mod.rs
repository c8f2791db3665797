#![allow(dead_code)]

use linkpred::dataset::{DatasetKind, FeatureMatrix, Partition};
use linkpred::{AttributeRecord, AttributedGraph};
use rand::{Rng, SeedableRng};
use statrs::distribution::ContinuousCDF;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi G(n, p) with missing attributes.
pub fn er_graph(n: usize, p: f64, seed: u64) -> AttributedGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    AttributedGraph::new("er", vec![AttributeRecord::missing(); n], edges).unwrap()
}

/// Dense adjacency matrix built from the public edge iterator.
pub fn adjacency(g: &AttributedGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut a = vec![vec![false; n]; n];
    for (u, v) in g.edges() {
        a[u][v] = true;
        a[v][u] = true;
    }
    a
}

pub fn matrix(cols: &[&str], rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
    FeatureMatrix::new(
        cols.iter().map(|c| c.to_string()).collect(),
        rows,
        labels,
        DatasetKind::Baseline,
        Partition::Train,
    )
    .unwrap()
}

pub fn named(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

pub fn matrix_n(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
    let d = rows.first().map_or(0, Vec::len);
    FeatureMatrix::new(named(d), rows, labels, DatasetKind::Baseline, Partition::Train).unwrap()
}

/// Relative error with an absolute floor, for finite-difference checks.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Brute-force neighbor metrics of (u, v) from a dense adjacency matrix:
/// (jc, aa, pa, rai).
pub fn oracle_scores(a: &[Vec<bool>], u: usize, v: usize) -> (f64, f64, f64, f64) {
    let n = a.len();
    let deg = |x: usize| a[x].iter().filter(|&&b| b).count();
    let common: Vec<usize> = (0..n).filter(|&z| a[u][z] && a[v][z]).collect();
    let union = (0..n).filter(|&z| a[u][z] || a[v][z]).count();
    let jc = if union == 0 { 0.0 } else { common.len() as f64 / union as f64 };
    let aa = common.iter().map(|&z| 1.0 / (deg(z) as f64).ln()).sum();
    let rai = common.iter().map(|&z| 1.0 / deg(z) as f64).sum();
    (jc, aa, (deg(u) * deg(v)) as f64, rai)
}

/// Writes `count` synthetic networks into `dir` and returns a pipeline
/// config over them. The last network is unseen when `count > 1`.
pub fn pipeline_fixture(
    dir: &std::path::Path,
    count: usize,
    nodes: usize,
    extra: &str,
) -> linkpred::pipeline::PipelineConfig {
    use linkpred::synthetic::{power_law_cluster, SyntheticConfig};
    let mut text = String::from(extra);
    text.push_str("\n[walk]\ndimensions = 16\nwalks_per_node = 4\nwalk_length = 20\nwindow = 5\nepochs = 1\n");
    for i in 0..count {
        let label = format!("net{i}");
        let cfg = SyntheticConfig { nodes, edges_per_node: 4, seed: 100 + i as u64, ..SyntheticConfig::default() };
        let g = power_law_cluster(&cfg, &label).unwrap();
        g.write_edge_file(&dir.join(format!("{label}.edges"))).unwrap();
        g.write_attribute_file(&dir.join(format!("{label}.attributes.csv"))).unwrap();
        let seen = count == 1 || i + 1 < count;
        text.push_str(&format!(
            "\n[[network]]\nlabel = \"{label}\"\nedges = \"{label}.edges\"\nattributes = \"{label}.attributes.csv\"\nseen = {seen}\n"
        ));
    }
    linkpred::pipeline::PipelineConfig::from_toml_str(&text, dir).unwrap()
}

/// Independent dual solver: accelerated projected gradient ascent on
/// `Σα − ½ αᵀQα` over `{0 ≤ α ≤ C, yᵀα = 0}`.
pub fn dual_qp_oracle(k: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let lip: f64 = (0..n).map(|i| q[i].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let project = |v: &[f64]| -> Vec<f64> {
        let at = |mu: f64| -> (Vec<f64>, f64) {
            let a: Vec<f64> = v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect();
            let s = a.iter().zip(y).map(|(ai, yi)| ai * yi).sum();
            (a, s)
        };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if at(mid).1 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at((lo + hi) / 2.0).0
    };
    let objective = |a: &[f64]| -> f64 {
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * a[j] * q[i][j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t: f64 = 1.0;
    for _ in 0..20000 {
        let g: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>()).collect();
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + gi / lip).collect();
        let next = project(&step);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&a).map(|(nx, ax)| nx + (t - 1.0) / t_next * (nx - ax)).collect();
        a = next;
        t = t_next;
    }
    objective(&a)
}


/// AUROC by counting every positive/negative pair, ties as one half.
pub fn brute_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Upper-tail p-value of Pearson's χ² statistic.
pub fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    1.0 - statrs::distribution::ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
}

