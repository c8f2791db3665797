//! End-to-end experiment driver.
//!
//! A run is a sequence of stages that communicate only through files under
//! the output directory, so each stage can also be run on its own:
//!
//! | stage    | reads                         | writes                                   |
//! |----------|-------------------------------|------------------------------------------|
//! | `stats`  | input networks                | `stats/graph_stats.csv`, degree histograms |
//! | `split`  | input networks                | `split/` pruned graphs and `samples.csv` |
//! | `embed`  | `split/`                      | `embed/<network>.emb[.bin]`              |
//! | `build`  | `split/`, `embed/`            | `build/<dataset>_<partition>.csv/.json`  |
//! | `select` | `build/`                      | `select/` rankings, importances, correlations |
//! | `train`  | `build/`, `select/`           | `train/<dataset>_<model>.model`          |
//! | `eval`   | `build/`, `train/`, `select/` | `eval/results.csv`, LDA projections       |
//!
//! Every stage writes a `manifest.json` listing its files together with the
//! config hash and the stage seed. Stage seeds are derived from the master
//! seed and the stage name. A complete run ends by writing `DONE`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{self, ModelConfig, ModelKind, TrainedModel};
use crate::dataset::{
    build_dataset_multi, network_seed, split_protocol, standardize, DatasetKind, DatasetManifest, FeatureMatrix,
    NetworkContext, NodePairSample, Partition, SplitSpec,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, lda_probe, results_csv};
use crate::graph::{degree_histogram, degree_histogram_csv, graph_stats, load_graph, AttributedGraph};
use crate::node2vec::{generate_walks, train_embeddings, EmbeddingTable, WalkConfig};
use crate::selection::{correlation_matrix, importance_csv, rf_importance, rfecv, DEFAULT_FOLDS};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stats,
    Split,
    Embed,
    Build,
    Select,
    Train,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Stats,
        Stage::Split,
        Stage::Embed,
        Stage::Build,
        Stage::Select,
        Stage::Train,
        Stage::Eval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Stats => "stats",
            Stage::Split => "split",
            Stage::Embed => "embed",
            Stage::Build => "build",
            Stage::Select => "select",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Identifier used in sample files and artifact names.
    pub label: String,
    pub edges: PathBuf,
    pub attributes: PathBuf,
    /// Seen networks contribute train and test samples; the others are only
    /// evaluated.
    #[serde(default = "yes")]
    pub seen: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub positive_fraction: f64,
    pub train_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            positive_fraction: s.positive_fraction,
            train_fraction: s.train_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    pub folds: usize,
    /// Rows drawn from the test partition for the LDA probe.
    pub lda_sample: usize,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            lda_sample: 200,
        }
    }
}

/// A named model configuration declared in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomPreset {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub config: ModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(rename = "network")]
    pub networks: Vec<NetworkSpec>,
    #[serde(default = "default_datasets")]
    pub datasets: Vec<DatasetKind>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub split: SplitSettings,
    /// Its `seed` is replaced by a per-network seed derived from the master
    /// seed.
    #[serde(default)]
    pub walk: WalkConfig,
    #[serde(default)]
    pub selection: SelectionSettings,
    /// Preset name per dataset kind and model kind; unlisted pairs use
    /// [`default_preset`].
    #[serde(default)]
    pub presets: BTreeMap<DatasetKind, BTreeMap<ModelKind, String>>,
    #[serde(default)]
    pub custom_presets: BTreeMap<String, CustomPreset>,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

fn default_datasets() -> Vec<DatasetKind> {
    DatasetKind::ALL.to_vec()
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Logreg, ModelKind::Svm, ModelKind::RandomForest, ModelKind::Mlp]
}

/// Built-in preset for a dataset/model pair.
pub fn default_preset(kind: DatasetKind, model: ModelKind) -> &'static str {
    match (kind, model) {
        (DatasetKind::Baseline, ModelKind::Logreg) => "logreg-baseline",
        (DatasetKind::Topological, ModelKind::Logreg) => "logreg-topological",
        (DatasetKind::Embedding, ModelKind::Logreg) => "logreg-embedding",
        (DatasetKind::Embedding, ModelKind::Svm) => "svm-gaussian",
        (_, ModelKind::Svm) => "svm-linear",
        (_, ModelKind::RandomForest) => "rf-default",
        (_, ModelKind::Mlp) => "mlp-default",
    }
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        for n in &mut cfg.networks {
            resolve(&mut n.edges);
            resolve(&mut n.attributes);
        }
        resolve(&mut cfg.output);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.networks.is_empty() {
            return Err(Error::Config("no networks configured".into()));
        }
        if !self.networks.iter().any(|n| n.seen) {
            return Err(Error::Config("at least one network must be seen".into()));
        }
        let mut labels = std::collections::HashSet::new();
        for n in &self.networks {
            let ok = !n.label.is_empty()
                && n.label.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
            if !ok {
                return Err(Error::Config(format!(
                    "network label `{}` must be non-empty and use only letters, digits, `_`, `.` or `-`",
                    n.label
                )));
            }
            if !labels.insert(&n.label) {
                return Err(Error::Config(format!("duplicate network label `{}`", n.label)));
            }
            for p in [&n.edges, &n.attributes] {
                if !p.is_file() {
                    return Err(Error::Config(format!("network `{}`: {} does not exist", n.label, p.display())));
                }
            }
        }
        if self.datasets.is_empty() || self.models.is_empty() {
            return Err(Error::Config("datasets and models must be non-empty".into()));
        }
        self.split_spec().validate()?;
        if self.datasets.contains(&DatasetKind::Embedding) {
            self.walk.validate()?;
        }
        if self.selection.folds < 2 {
            return Err(Error::Config("selection.folds must be at least 2".into()));
        }
        for &kind in &self.datasets {
            for &model in &self.models {
                self.model_config(kind, model)?;
            }
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            positive_fraction: self.split.positive_fraction,
            train_fraction: self.split.train_fraction,
            seed: stage_seed(self.seed, Stage::Split),
            seen_networks: self.networks.iter().filter(|n| n.seen).map(|n| n.label.clone()).collect(),
            unseen_networks: self.networks.iter().filter(|n| !n.seen).map(|n| n.label.clone()).collect(),
        }
    }

    /// Resolved model configuration, with the seed derived from the train
    /// stage seed.
    pub fn model_config(&self, kind: DatasetKind, model: ModelKind) -> Result<ModelConfig> {
        let name = self
            .presets
            .get(&kind)
            .and_then(|m| m.get(&model))
            .map_or(default_preset(kind, model), String::as_str);
        let (preset_kind, mut cfg) = match self.custom_presets.get(name) {
            Some(p) => (p.kind, p.config.clone()),
            None => classifiers::preset(name)?,
        };
        if preset_kind != model {
            return Err(Error::Config(format!(
                "preset `{name}` is a {preset_kind} preset but is assigned to {model} on {kind}"
            )));
        }
        let tag = format!("{kind}/{model}");
        cfg.seed = util::mix_seed(stage_seed(self.seed, Stage::Train), hash_u64(tag.as_bytes()));
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form of the config, excluding the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

fn hash_u64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Seed of one stage, derived from the master seed and the stage name.
pub fn stage_seed(master: u64, stage: Stage) -> u64 {
    hash_u64(format!("{master}/{stage}").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: Stage,
    pub config_hash: String,
    pub seed: u64,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
}

pub const DONE_MARKER: &str = "DONE";
pub const RESULTS_FILE: &str = "eval/results.csv";

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    stage: Stage,
    files: Vec<String>,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        stage_seed(self.cfg.seed, self.stage)
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.output.join(rel)
    }

    fn write(&mut self, rel: String, contents: impl AsRef<[u8]>) -> Result<()> {
        util::write_file(&self.path(&rel), contents)?;
        self.files.push(rel);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: String, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Path of an upstream artifact, which must already exist.
    fn input(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Dependency(p))
        }
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T> {
        let text = util::read_to_string(&self.input(rel)?)?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{rel}: {e}")))
    }

    fn finish(mut self) -> Result<()> {
        let manifest = StageManifest {
            stage: self.stage,
            config_hash: self.cfg.hash(),
            seed: self.seed(),
            files: std::mem::take(&mut self.files),
        };
        let rel = format!("{}/manifest.json", self.stage);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
        text.push('\n');
        util::write_file(&self.path(&rel), text)
    }
}

fn load_input_networks(cfg: &PipelineConfig) -> Result<Vec<AttributedGraph>> {
    cfg.networks
        .iter()
        .map(|n| load_graph(&n.edges, &n.attributes, &n.label))
        .collect()
}

fn train_graph_paths(label: &str) -> (String, String) {
    (format!("split/{label}.edges"), format!("split/{label}.attributes.csv"))
}

fn load_train_graph(ctx: &Ctx, label: &str) -> Result<AttributedGraph> {
    let (e, a) = train_graph_paths(label);
    load_graph(&ctx.input(&e)?, &ctx.input(&a)?, label)
}

const SAMPLES_FILE: &str = "split/samples.csv";

fn stage_stats(ctx: &mut Ctx) -> Result<()> {
    let graphs = load_input_networks(ctx.cfg)?;
    let mut table = String::from("network,seen,n,m,d,c\n");
    for (g, spec) in graphs.iter().zip(&ctx.cfg.networks) {
        let s = graph_stats(g)?;
        let _ = writeln!(table, "{},{},{},{},{},{}", spec.label, u8::from(spec.seen), s.n, s.m, s.d, s.c);
        ctx.write(
            format!("stats/degree_{}.csv", spec.label),
            degree_histogram_csv(&degree_histogram(g)),
        )?;
    }
    ctx.write("stats/graph_stats.csv".into(), table)
}

fn stage_split(ctx: &mut Ctx) -> Result<()> {
    let graphs = load_input_networks(ctx.cfg)?;
    let split = split_protocol(&graphs, &ctx.cfg.split_spec())?;
    for (label, s) in &split.networks {
        let (e, a) = train_graph_paths(label);
        s.train_graph.write_edge_file(&ctx.path(&e))?;
        ctx.files.push(e);
        s.train_graph.write_attribute_file(&ctx.path(&a))?;
        ctx.files.push(a);
    }
    let mut out = String::from("network,u,v,label,partition\n");
    for p in [Partition::Train, Partition::Test, Partition::Unseen] {
        for s in split.partition(p) {
            let g = &split.networks[&s.network_id].train_graph;
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.network_id,
                g.original_id(s.u),
                g.original_id(s.v),
                s.label,
                p
            );
        }
    }
    ctx.write(SAMPLES_FILE.into(), out)
}

fn embedding_path(label: &str) -> String {
    format!("embed/{label}.emb.bin")
}

fn stage_embed(ctx: &mut Ctx) -> Result<()> {
    if !ctx.cfg.datasets.contains(&DatasetKind::Embedding) {
        log::info!("embed: no embedding dataset requested; nothing to do");
        return Ok(());
    }
    // networks are independent, so they train concurrently; each one stays
    // sequential and reproducible
    let shared: &Ctx = ctx;
    let tables = shared
        .cfg
        .networks
        .par_iter()
        .map(|spec| -> Result<EmbeddingTable> {
            let g = load_train_graph(shared, &spec.label)?;
            let walk_cfg = WalkConfig {
                seed: network_seed(shared.seed(), &spec.label),
                ..shared.cfg.walk.clone()
            };
            let report = generate_walks(&g, &walk_cfg)?;
            log::info!(
                "embed: {} walks on `{}` ({} isolated nodes skipped)",
                report.walks.len(),
                spec.label,
                report.skipped.len()
            );
            Ok(train_embeddings(&report.walks, &walk_cfg, g.node_count())?.with_network_id(&spec.label))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = ctx.cfg.networks.iter().map(|n| n.label.clone()).collect();
    for (label, table) in labels.iter().zip(tables) {
        ctx.write(format!("embed/{label}.emb"), table.to_text())?;
        ctx.write(embedding_path(label), table.to_bytes())?;
    }
    Ok(())
}

fn read_samples(ctx: &Ctx, graphs: &BTreeMap<String, AttributedGraph>) -> Result<BTreeMap<Partition, Vec<NodePairSample>>> {
    let path = ctx.input(SAMPLES_FILE)?;
    let text = util::read_to_string(&path)?;
    let bad = |line: usize, message: String| Error::Parse {
        path: path.clone(),
        line,
        message,
    };
    let mut out: BTreeMap<Partition, Vec<NodePairSample>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(i + 1, format!("expected 5 fields, got {}", f.len())));
        }
        let g = graphs
            .get(f[0])
            .ok_or_else(|| Error::Referential(format!("samples refer to unknown network `{}`", f[0])))?;
        let node = |s: &str| -> Result<usize> {
            let id: u64 = s.parse().map_err(|_| bad(i + 1, format!("invalid node id {s:?}")))?;
            g.index_of(id)
                .ok_or_else(|| Error::Referential(format!("node {id} is not in network `{}`", f[0])))
        };
        let label = match f[3] {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(i + 1, format!("invalid label {other:?}"))),
        };
        let (u, v) = (node(f[1])?, node(f[2])?);
        let partition: Partition = f[4].parse().map_err(|_| bad(i + 1, format!("invalid partition {:?}", f[4])))?;
        out.entry(partition).or_default().push(NodePairSample {
            network_id: f[0].to_string(),
            u: u.min(v),
            v: u.max(v),
            label,
        });
    }
    Ok(out)
}

fn matrix_path(kind: DatasetKind, p: Partition) -> String {
    format!("build/{kind}_{p}.csv")
}

fn stage_build(ctx: &mut Ctx) -> Result<()> {
    let mut graphs = BTreeMap::new();
    for spec in &ctx.cfg.networks {
        graphs.insert(spec.label.clone(), load_train_graph(ctx, &spec.label)?);
    }
    let samples = read_samples(ctx, &graphs)?;
    let empty = Vec::new();
    let part = |p: Partition| samples.get(&p).unwrap_or(&empty);
    let split_seed = stage_seed(ctx.cfg.seed, Stage::Split);
    for &kind in &ctx.cfg.datasets {
        let mut contexts = BTreeMap::new();
        for (label, g) in &graphs {
            let emb = if kind == DatasetKind::Embedding {
                let p = ctx.input(&embedding_path(label))?;
                Some(EmbeddingTable::read_binary(&p, ctx.cfg.walk.clone(), label)?)
            } else {
                None
            };
            contexts.insert(label.clone(), NetworkContext::new(g.clone(), emb));
        }
        let build = |p| build_dataset_multi(kind, part(p), &contexts, p);
        let train_raw = build(Partition::Train)?;
        let (train, others, st) = standardize(&train_raw, &[build(Partition::Test)?, build(Partition::Unseen)?])?;
        for m in std::iter::once(&train).chain(&others) {
            ctx.write(matrix_path(kind, m.partition), m.to_csv())?;
            let manifest = DatasetManifest {
                kind,
                partition: m.partition,
                seed: split_seed,
                columns: m.column_names.clone(),
                rows: m.n_rows(),
                standardization: Some(st.clone()),
            };
            ctx.write_json(format!("build/{kind}_{}.json", m.partition), &manifest)?;
        }
    }
    Ok(())
}

fn read_matrix(ctx: &Ctx, kind: DatasetKind, p: Partition) -> Result<FeatureMatrix> {
    FeatureMatrix::read_csv(&ctx.input(&matrix_path(kind, p))?, kind, p)
}

fn selected_path(kind: DatasetKind) -> String {
    format!("select/{kind}_selected.json")
}

fn stage_select(ctx: &mut Ctx) -> Result<()> {
    let seed = ctx.seed();
    for &kind in &ctx.cfg.datasets {
        let train = read_matrix(ctx, kind, Partition::Train)?;
        let selected = if kind == DatasetKind::Embedding {
            // too many columns for elimination; the pair features are already
            // restricted to same_year and same_dorm
            train.column_names.clone()
        } else {
            let report = rfecv(&train, ctx.cfg.selection.folds, seed)?;
            ctx.write(format!("select/{kind}_ranking.csv"), report.to_csv())?;
            ctx.write(format!("select/{kind}_cv.csv"), report.cv_csv())?;
            log::info!("select: {kind} keeps {:?}", report.selected);
            report.selected
        };
        let (_, mut rf_cfg) = classifiers::preset("rf-default")?;
        rf_cfg.seed = seed;
        let imp = rf_importance(&train, &rf_cfg)?;
        ctx.write(format!("select/{kind}_importance.csv"), importance_csv(&imp))?;
        ctx.write(format!("select/{kind}_correlation.csv"), correlation_matrix(&train)?.to_csv())?;
        ctx.write_json(selected_path(kind), &selected)?;
    }
    Ok(())
}

fn model_path(kind: DatasetKind, model: ModelKind) -> String {
    format!("train/{kind}_{model}.model")
}

fn stage_train(ctx: &mut Ctx) -> Result<()> {
    for &kind in &ctx.cfg.datasets {
        let selected: Vec<String> = ctx.read_json(&selected_path(kind))?;
        let train = read_matrix(ctx, kind, Partition::Train)?.select_columns(&selected)?;
        for &model in &ctx.cfg.models {
            let cfg = ctx.cfg.model_config(kind, model)?;
            log::info!("train: {model} on {kind} ({} rows, {} columns)", train.n_rows(), train.n_cols());
            let m = classifiers::train(model, &train, &cfg)?;
            let rel = model_path(kind, model);
            m.save(&ctx.path(&rel))?;
            ctx.files.push(rel);
        }
    }
    Ok(())
}

fn stage_eval(ctx: &mut Ctx) -> Result<()> {
    let mut reports = Vec::new();
    let seed = ctx.seed();
    for &kind in &ctx.cfg.datasets {
        let parts: Vec<FeatureMatrix> = [Partition::Test, Partition::Unseen]
            .into_iter()
            .map(|p| read_matrix(ctx, kind, p))
            .collect::<Result<_>>()?;
        for &model in &ctx.cfg.models {
            let m = TrainedModel::load(&ctx.input(&model_path(kind, model))?)?;
            for x in parts.iter().filter(|x| !x.is_empty()) {
                reports.push(evaluate(&m, &x.select_columns(&m.feature_columns)?)?);
            }
        }
        let selected: Vec<String> = ctx.read_json(&selected_path(kind))?;
        let test = parts[0].select_columns(&selected)?;
        let probe = lda_probe(&test, ctx.cfg.selection.lda_sample.min(test.n_rows()), seed)?;
        ctx.write(format!("eval/lda_{kind}.csv"), probe.to_csv())?;
        ctx.write_json(
            format!("eval/lda_{kind}.json"),
            &serde_json::json!({
                "threshold": probe.threshold,
                "train_accuracy": probe.train_accuracy,
                "direction": probe.direction,
                "columns": selected,
            }),
        )?;
    }
    ctx.write(RESULTS_FILE.into(), results_csv(&reports))
}

/// Runs one stage against the artifacts under `cfg.output`.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<()> {
    log::info!("stage {stage}: start");
    let mut ctx = Ctx {
        cfg,
        stage,
        files: Vec::new(),
    };
    let res = match stage {
        Stage::Stats => stage_stats(&mut ctx),
        Stage::Split => stage_split(&mut ctx),
        Stage::Embed => stage_embed(&mut ctx),
        Stage::Build => stage_build(&mut ctx),
        Stage::Select => stage_select(&mut ctx),
        Stage::Train => stage_train(&mut ctx),
        Stage::Eval => stage_eval(&mut ctx),
    }
    .and_then(|()| ctx.finish());
    res.map_err(|e| Error::Stage {
        stage: stage.to_string(),
        source: Box::new(e),
    })
}

/// Runs the given stages in pipeline order. `DONE` is written only when
/// every stage was requested and all of them succeeded.
pub fn run_stages(cfg: &PipelineConfig, stages: &[Stage]) -> Result<()> {
    cfg.validate()?;
    let done = cfg.output.join(DONE_MARKER);
    if done.exists() {
        std::fs::remove_file(&done).map_err(|e| Error::Io { path: done.clone(), source: e })?;
    }
    for stage in Stage::ALL.into_iter().filter(|s| stages.contains(s)) {
        run_stage(cfg, stage)?;
    }
    if Stage::ALL.iter().all(|s| stages.contains(s)) {
        util::write_file(&done, format!("{}\n", cfg.hash()))?;
    }
    Ok(())
}

/// Runs every stage and returns the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PathBuf> {
    run_stages(cfg, &Stage::ALL)?;
    Ok(cfg.output.clone())
}
