//! Synthetic attributed social networks for tests and desk-scale runs.
//!
//! Topology follows the Holme–Kim power-law-cluster process: each new node
//! makes one preferential-attachment link, then each further link is, with
//! probability `triad_probability`, a triad-closing link to a neighbour of
//! the previous target. Attributes are homophilous: a new node copies the
//! dorm and year of its first target with probability `homophily`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeRecord, AttributedGraph};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub nodes: usize,
    pub edges_per_node: usize,
    pub triad_probability: f64,
    pub homophily: f64,
    pub dorms: i64,
    pub majors: i64,
    pub high_schools: i64,
    pub first_year: i32,
    pub years: i32,
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            nodes: 3000,
            edges_per_node: 8,
            triad_probability: 0.9,
            homophily: 0.6,
            dorms: 40,
            majors: 60,
            high_schools: 800,
            first_year: 2005,
            years: 5,
            missing_rate: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.edges_per_node == 0 || self.nodes <= self.edges_per_node {
            return Err(Error::Config(format!(
                "need 0 < edges_per_node < nodes, got {} and {}",
                self.edges_per_node, self.nodes
            )));
        }
        for (name, v) in [
            ("triad_probability", self.triad_probability),
            ("homophily", self.homophily),
            ("missing_rate", self.missing_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.dorms < 1 || self.majors < 1 || self.high_schools < 1 || self.years < 1 {
            return Err(Error::Config("attribute code ranges must be non-empty".into()));
        }
        Ok(())
    }
}

fn code(rng: &mut util::Rng, range: i64, missing: f64) -> i64 {
    if rng.random_bool(missing) {
        0
    } else {
        rng.random_range(1..=range)
    }
}

fn fresh_attributes(cfg: &SyntheticConfig, rng: &mut util::Rng) -> AttributeRecord {
    let m = cfg.missing_rate;
    AttributeRecord {
        status: code(rng, 6, m),
        gender: code(rng, 2, m),
        major: code(rng, cfg.majors, m),
        minor: code(rng, cfg.majors, m),
        dorm: code(rng, cfg.dorms, m),
        year: (!rng.random_bool(m)).then(|| cfg.first_year + rng.random_range(0..cfg.years)),
        high_school: code(rng, cfg.high_schools, m),
    }
}

/// Draws `k` distinct nodes with probability proportional to their
/// multiplicity in `pool`, skipping `exclude`.
fn distinct_from_pool(pool: &[usize], k: usize, exclude: &[usize], rng: &mut util::Rng) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(k);
    while out.len() < k {
        let c = pool[rng.random_range(0..pool.len())];
        if !out.contains(&c) && !exclude.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Generates one network. Node ids are `0..nodes`.
pub fn power_law_cluster(cfg: &SyntheticConfig, network_id: &str) -> Result<AttributedGraph> {
    cfg.validate()?;
    let (n, m) = (cfg.nodes, cfg.edges_per_node);
    let mut rng = util::rng(cfg.seed);
    let mut attrs: Vec<AttributeRecord> = (0..m).map(|_| fresh_attributes(cfg, &mut rng)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    // every endpoint occurrence, so uniform draws are degree-proportional;
    // the seed nodes start with weight one each
    let mut pool: Vec<usize> = (0..m).collect();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n * m);

    for source in m..n {
        adj.push(Vec::new());
        let targets = distinct_from_pool(&pool, m, &[], &mut rng);
        let mut pending = targets.into_iter();
        let mut target = pending.next().unwrap();
        let first = target;
        let mut linked: Vec<usize> = Vec::with_capacity(m);
        let mut link = |a: usize, adj: &mut Vec<Vec<usize>>, linked: &mut Vec<usize>, pool: &mut Vec<usize>| {
            adj[source].push(a);
            adj[a].push(source);
            linked.push(a);
            pool.push(a);
            edges.push((a, source));
        };
        link(target, &mut adj, &mut linked, &mut pool);
        while linked.len() < m {
            if rng.random_bool(cfg.triad_probability) {
                let options: Vec<usize> = adj[target]
                    .iter()
                    .copied()
                    .filter(|&c| c != source && !linked.contains(&c))
                    .collect();
                if !options.is_empty() {
                    let c = options[rng.random_range(0..options.len())];
                    link(c, &mut adj, &mut linked, &mut pool);
                    continue;
                }
            }
            target = match pending.find(|t| !linked.contains(t)) {
                Some(t) => t,
                None => distinct_from_pool(&pool, 1, &linked, &mut rng)[0],
            };
            link(target, &mut adj, &mut linked, &mut pool);
        }
        pool.extend(std::iter::repeat_n(source, m));

        let mut a = fresh_attributes(cfg, &mut rng);
        if rng.random_bool(cfg.homophily) {
            a.dorm = attrs[first].dorm;
        }
        if rng.random_bool(cfg.homophily) {
            a.year = attrs[first].year;
        }
        attrs.push(a);
    }
    AttributedGraph::new(network_id, attrs, edges)
}
