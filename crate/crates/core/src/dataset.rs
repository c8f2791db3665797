//! Sample construction and feature matrices.
//!
//! For every network a fraction of edges is held out as positive samples and
//! an equal number of non-adjacent pairs is drawn as negatives. Features are
//! computed on the pruned graph only. Samples of seen networks are pooled and
//! split into train/test; samples of unseen networks are kept for testing
//! generalisation to new graphs.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::metrics;
use crate::node2vec::{edge_embedding, EmbeddingTable};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub positive_fraction: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub seen_networks: Vec<String>,
    pub unseen_networks: Vec<String>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            positive_fraction: 0.02,
            train_fraction: 0.8,
            seed: 0,
            seen_networks: Vec::new(),
            unseen_networks: Vec::new(),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.positive_fraction) {
            return Err(Error::Config(format!(
                "positive_fraction must lie in (0, 1), got {}",
                self.positive_fraction
            )));
        }
        if !open_unit(self.train_fraction) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let seen: HashSet<&String> = self.seen_networks.iter().collect();
        if let Some(dup) = self.unseen_networks.iter().find(|n| seen.contains(n)) {
            return Err(Error::Config(format!("network `{dup}` is both seen and unseen")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePairSample {
    pub network_id: String,
    /// Always `u < v`.
    pub u: usize,
    pub v: usize,
    /// 1 for a held-out edge, 0 for a non-edge.
    pub label: u8,
}

impl NodePairSample {
    fn new(network_id: &str, a: usize, b: usize, label: u8) -> Self {
        Self {
            network_id: network_id.to_string(),
            u: a.min(b),
            v: a.max(b),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Baseline,
    Topological,
    Embedding,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [DatasetKind::Baseline, DatasetKind::Topological, DatasetKind::Embedding];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Baseline => "baseline",
            DatasetKind::Topological => "topological",
            DatasetKind::Embedding => "embedding",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(DatasetKind::Baseline),
            "topological" => Ok(DatasetKind::Topological),
            "embedding" => Ok(DatasetKind::Embedding),
            other => Err(Error::Config(format!("unknown dataset kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
    Unseen,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
            Partition::Unseen => "unseen",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "test" => Ok(Partition::Test),
            "unseen" => Ok(Partition::Unseen),
            other => Err(Error::Config(format!("unknown partition `{other}`"))),
        }
    }
}

/// Attribute-derived features of a node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures {
    pub same_dorm: f64,
    pub same_year: f64,
    pub year_diff: f64,
    pub high_school_1: f64,
    pub high_school_2: f64,
    pub major_1: f64,
    pub major_2: f64,
    pub same_faculty: f64,
    pub same_gender: f64,
}

pub const TOPOLOGY_COLUMNS: [&str; 4] = ["jc", "aa", "pa", "rai"];

pub const PAIR_FEATURE_COLUMNS: [&str; 9] = [
    "same_dorm",
    "same_year",
    "year_diff",
    "high_school_1",
    "high_school_2",
    "major_1",
    "major_2",
    "same_faculty",
    "same_gender",
];

/// Node-based columns kept in the embedding dataset.
pub const EMBEDDING_PAIR_COLUMNS: [&str; 2] = ["same_year", "same_dorm"];

impl PairFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.same_dorm,
            self.same_year,
            self.year_diff,
            self.high_school_1,
            self.high_school_2,
            self.major_1,
            self.major_2,
            self.same_faculty,
            self.same_gender,
        ]
    }
}

fn same_code(a: i64, b: i64) -> f64 {
    if a != 0 && a == b {
        1.0
    } else {
        0.0
    }
}

/// Mean of the known years in a network; 0 when no year is known.
pub fn year_mean(g: &AttributedGraph) -> f64 {
    let years: Vec<f64> = (0..g.node_count())
        .filter_map(|u| g.attributes(u).year.map(f64::from))
        .collect();
    util::mean(&years)
}

pub fn node_pair_features(g: &AttributedGraph, u: usize, v: usize, year_mean: f64) -> Result<PairFeatures> {
    g.check_node(u)?;
    g.check_node(v)?;
    let (a, b) = (g.attributes(u), g.attributes(v));
    let same_year = match (a.year, b.year) {
        (Some(x), Some(y)) if x == y => 1.0,
        _ => 0.0,
    };
    let ya = a.year.map_or(year_mean, f64::from);
    let yb = b.year.map_or(year_mean, f64::from);
    Ok(PairFeatures {
        same_dorm: same_code(a.dorm, b.dorm),
        same_year,
        year_diff: (ya - yb).abs(),
        high_school_1: a.high_school.min(b.high_school) as f64,
        high_school_2: a.high_school.max(b.high_school) as f64,
        major_1: a.major.min(b.major) as f64,
        major_2: a.major.max(b.major) as f64,
        same_faculty: same_code(a.status, b.status),
        same_gender: same_code(a.gender, b.gender),
    })
}

/// Result of holding out edges of one network.
#[derive(Debug, Clone)]
pub struct NetworkSplit {
    pub train_graph: AttributedGraph,
    pub positives: Vec<NodePairSample>,
    pub negatives: Vec<NodePairSample>,
}

/// Seed for one network, independent of which other networks are present.
pub(crate) fn network_seed(seed: u64, network_id: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(network_id.as_bytes());
    util::mix_seed(seed, u64::from_le_bytes(digest[..8].try_into().unwrap()))
}

/// Removes `round(positive_fraction * m)` random edges as positives and draws
/// the same number of distinct non-edges as negatives.
pub fn split_network(g: &AttributedGraph, spec: &SplitSpec) -> Result<NetworkSplit> {
    spec.validate()?;
    let m = g.edge_count();
    let k = (spec.positive_fraction * m as f64).round() as usize;
    if k == 0 {
        return Err(Error::Domain(format!(
            "network `{}`: positive_fraction * m = {} rounds to no positives",
            g.network_id(),
            spec.positive_fraction * m as f64
        )));
    }
    let mut rng = util::rng(network_seed(spec.seed, g.network_id()));
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let held_out: Vec<(usize, usize)> = index::sample(&mut rng, m, k).into_iter().map(|i| edges[i]).collect();
    let positives = held_out
        .iter()
        .map(|&(u, v)| NodePairSample::new(g.network_id(), u, v, 1))
        .collect();

    let n = g.node_count();
    let cap = 100 * k;
    let mut chosen = HashSet::with_capacity(k);
    let mut negatives = Vec::with_capacity(k);
    let mut attempts = 0;
    while negatives.len() < k {
        if attempts >= cap || n < 2 {
            return Err(Error::Sampling(format!(
                "network `{}`: found {} of {k} negatives after {attempts} attempts",
                g.network_id(),
                negatives.len()
            )));
        }
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || g.has_edge(a, b) {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if chosen.insert(key) {
            negatives.push(NodePairSample::new(g.network_id(), a, b, 0));
        }
    }
    Ok(NetworkSplit {
        train_graph: g.without_edges(&held_out)?,
        positives,
        negatives,
    })
}

/// Samples of all networks, assigned to partitions.
#[derive(Debug, Clone)]
pub struct ProtocolSplit {
    pub networks: BTreeMap<String, NetworkSplit>,
    pub train: Vec<NodePairSample>,
    pub test: Vec<NodePairSample>,
    pub unseen: Vec<NodePairSample>,
}

impl ProtocolSplit {
    pub fn partition(&self, p: Partition) -> &[NodePairSample] {
        match p {
            Partition::Train => &self.train,
            Partition::Test => &self.test,
            Partition::Unseen => &self.unseen,
        }
    }
}

/// Applies [`split_network`] to every network, pools the seen networks'
/// samples into a label-stratified train/test split, and assigns all samples
/// of unseen networks to the unseen partition.
pub fn split_protocol(networks: &[AttributedGraph], spec: &SplitSpec) -> Result<ProtocolSplit> {
    spec.validate()?;
    if spec.seen_networks.is_empty() {
        return Err(Error::Config("at least one seen network is required".into()));
    }
    for g in networks {
        let id = g.network_id().to_string();
        if !spec.seen_networks.contains(&id) && !spec.unseen_networks.contains(&id) {
            return Err(Error::Config(format!("network `{id}` is neither seen nor unseen")));
        }
    }
    for id in spec.seen_networks.iter().chain(&spec.unseen_networks) {
        if !networks.iter().any(|g| g.network_id() == id) {
            return Err(Error::Config(format!("network `{id}` was not loaded")));
        }
    }
    let splits: Vec<(String, NetworkSplit)> = networks
        .par_iter()
        .map(|g| split_network(g, spec).map(|s| (g.network_id().to_string(), s)))
        .collect::<Result<_>>()?;
    let networks: BTreeMap<String, NetworkSplit> = splits.into_iter().collect();

    let mut rng = util::rng(util::mix_seed(spec.seed, 0x5350_4c49_54));
    let (mut train, mut test, mut unseen) = (Vec::new(), Vec::new(), Vec::new());
    for label in [1u8, 0] {
        let mut pool: Vec<NodePairSample> = networks
            .iter()
            .filter(|(id, _)| spec.seen_networks.contains(id))
            .flat_map(|(_, s)| if label == 1 { &s.positives } else { &s.negatives })
            .cloned()
            .collect();
        pool.shuffle(&mut rng);
        let cut = (spec.train_fraction * pool.len() as f64).round() as usize;
        test.extend(pool.split_off(cut));
        train.extend(pool);
    }
    for (id, s) in &networks {
        if spec.unseen_networks.contains(id) {
            unseen.extend(s.positives.iter().chain(&s.negatives).cloned());
        }
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    unseen.shuffle(&mut rng);
    Ok(ProtocolSplit {
        networks,
        train,
        test,
        unseen,
    })
}

/// Row-per-pair numeric matrix with named columns and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub kind: DatasetKind,
    pub partition: Partition,
}

impl FeatureMatrix {
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        kind: DatasetKind,
        partition: Partition,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Schema(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != column_names.len()) {
            return Err(Error::Schema(format!(
                "row {i} has {} values, expected {}",
                rows[i].len(),
                column_names.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric(format!("row {i} contains a non-finite value")));
        }
        Ok(Self {
            column_names,
            rows,
            labels,
            kind,
            partition,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Projection onto the named columns, in the given order.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_names
                    .iter()
                    .position(|c| c == n.as_ref())
                    .ok_or_else(|| Error::Schema(format!("no column named `{}`", n.as_ref())))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            column_names: idx.iter().map(|&j| self.column_names[j].clone()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
            labels: self.labels.clone(),
            kind: self.kind,
            partition: self.partition,
        })
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            column_names: self.column_names.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            kind: self.kind,
            partition: self.partition,
        }
    }

    /// CSV with a header row and a trailing `label` column.
    pub fn to_csv(&self) -> String {
        let mut out = self.column_names.join(",");
        out.push_str(",label\n");
        for (row, label) in self.rows.iter().zip(&self.labels) {
            for v in row {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{label}");
        }
        out
    }

    pub fn from_csv(text: &str, kind: DatasetKind, partition: Partition) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: "<feature matrix>".into(),
            line,
            message,
        };
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        if header.last().map(String::as_str) != Some("label") {
            return Err(bad(1, "last column must be `label`".into()));
        }
        let names = header[..header.len() - 1].to_vec();
        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(bad(i + 2, format!("expected {} fields, got {}", header.len(), fields.len())));
            }
            let row = fields[..names.len()]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(i + 2, format!("invalid number {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let label = match *fields.last().unwrap() {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(i + 2, format!("invalid label {other:?}"))),
            };
            rows.push(row);
            labels.push(label);
        }
        Self::new(names, rows, labels, kind, partition)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        util::write_file(path, self.to_csv())
    }

    pub fn read_csv(path: &Path, kind: DatasetKind, partition: Partition) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Dependency(path.to_path_buf()));
        }
        Self::from_csv(&util::read_to_string(path)?, kind, partition)
    }
}

/// Column names of a dataset kind, in row order.
pub fn dataset_columns(kind: DatasetKind, embedding_dims: usize) -> Vec<String> {
    let owned = |cols: &[&str]| cols.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    match kind {
        DatasetKind::Baseline => owned(&TOPOLOGY_COLUMNS),
        DatasetKind::Topological => {
            let mut c = owned(&TOPOLOGY_COLUMNS);
            c.extend(owned(&PAIR_FEATURE_COLUMNS));
            c
        }
        DatasetKind::Embedding => {
            let mut c = owned(&EMBEDDING_PAIR_COLUMNS);
            c.extend((0..embedding_dims).map(|i| format!("emb_{i}")));
            c
        }
    }
}

/// Per-network inputs needed to featurise samples.
#[derive(Debug, Clone)]
pub struct NetworkContext {
    pub train_graph: AttributedGraph,
    pub year_mean: f64,
    pub embedding: Option<EmbeddingTable>,
}

impl NetworkContext {
    pub fn new(train_graph: AttributedGraph, embedding: Option<EmbeddingTable>) -> Self {
        Self {
            year_mean: year_mean(&train_graph),
            train_graph,
            embedding,
        }
    }
}

fn feature_row(kind: DatasetKind, s: &NodePairSample, ctx: &NetworkContext) -> Result<Vec<f64>> {
    let g = &ctx.train_graph;
    match kind {
        DatasetKind::Baseline | DatasetKind::Topological => {
            let t = metrics::score_pairs(g, &[(s.u, s.v)])?[0];
            let mut row = vec![t.jc, t.aa, t.pa, t.rai];
            if kind == DatasetKind::Topological {
                row.extend(node_pair_features(g, s.u, s.v, ctx.year_mean)?.to_vec());
            }
            Ok(row)
        }
        DatasetKind::Embedding => {
            let emb = ctx.embedding.as_ref().ok_or_else(|| {
                Error::Domain(format!("embedding dataset needs an embedding for `{}`", s.network_id))
            })?;
            let pf = node_pair_features(g, s.u, s.v, ctx.year_mean)?;
            let mut row = vec![pf.same_year, pf.same_dorm];
            row.extend(edge_embedding(emb, s.u, s.v)?);
            Ok(row)
        }
    }
}

/// Featurises samples of one network against its pruned graph.
pub fn build_dataset(
    kind: DatasetKind,
    samples: &[NodePairSample],
    train_graph: &AttributedGraph,
    embedding: Option<&EmbeddingTable>,
    partition: Partition,
) -> Result<FeatureMatrix> {
    if (kind == DatasetKind::Embedding) != embedding.is_some() {
        return Err(Error::Domain(format!(
            "an embedding table must be supplied exactly for the embedding dataset (kind {kind})"
        )));
    }
    let ctx = NetworkContext::new(train_graph.clone(), embedding.cloned());
    let mut contexts = BTreeMap::new();
    contexts.insert(train_graph.network_id().to_string(), ctx);
    build_dataset_multi(kind, samples, &contexts, partition)
}

/// Featurises samples drawn from several networks; row `i` is `samples[i]`.
pub fn build_dataset_multi(
    kind: DatasetKind,
    samples: &[NodePairSample],
    contexts: &BTreeMap<String, NetworkContext>,
    partition: Partition,
) -> Result<FeatureMatrix> {
    let mut dims = None;
    if kind == DatasetKind::Embedding {
        for ctx in contexts.values() {
            let d = ctx
                .embedding
                .as_ref()
                .ok_or_else(|| Error::Domain(format!("no embedding for `{}`", ctx.train_graph.network_id())))?
                .dimensions();
            if *dims.get_or_insert(d) != d {
                return Err(Error::Schema("embedding dimensions differ between networks".into()));
            }
        }
    }
    let rows = samples
        .par_iter()
        .map(|s| {
            let ctx = contexts
                .get(&s.network_id)
                .ok_or_else(|| Error::Referential(format!("no network `{}` for sample", s.network_id)))?;
            feature_row(kind, s, ctx)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = samples.iter().map(|s| s.label).collect();
    FeatureMatrix::new(dataset_columns(kind, dims.unwrap_or(0)), rows, labels, kind, partition)
}

/// Per-column affine transform `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits on the given matrix using population variance; zero-variance
    /// columns get scale 1.
    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Domain("cannot standardise with an empty train matrix".into()));
        }
        let n = train.n_rows() as f64;
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for j in 0..train.n_cols() {
            let col = train.column(j);
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            scale.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Ok(Self {
            columns: train.column_names.clone(),
            mean,
            scale,
        })
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.column_names != self.columns {
            return Err(Error::Schema("matrix columns differ from the fitted columns".into()));
        }
        let rows = x
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect();
        FeatureMatrix::new(x.column_names.clone(), rows, x.labels.clone(), x.kind, x.partition)
    }
}

/// Fits on `train` only and applies the transform to `train` and `others`.
pub fn standardize(
    train: &FeatureMatrix,
    others: &[FeatureMatrix],
) -> Result<(FeatureMatrix, Vec<FeatureMatrix>, Standardizer)> {
    let st = Standardizer::fit(train)?;
    let t = st.transform(train)?;
    let o = others.iter().map(|m| st.transform(m)).collect::<Result<_>>()?;
    Ok((t, o, st))
}

/// JSON sidecar describing a persisted feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub partition: Partition,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: usize,
    pub standardization: Option<Standardizer>,
}
