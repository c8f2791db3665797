use std::sync::OnceLock;

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WalkConfig;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::util;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk {
    pub nodes: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct WalkReport {
    pub walks: Vec<Walk>,
    /// Nodes of degree zero, which start no walks.
    pub skipped: Vec<usize>,
}

/// Unnormalised second-order transition weights out of `current`, aligned
/// with `g.neighbors(current)`, given that the walk arrived from `previous`.
pub fn transition_weights(
    g: &AttributedGraph,
    previous: usize,
    current: usize,
    return_p: f64,
    in_out_q: f64,
) -> Vec<f64> {
    g.neighbors(current)
        .iter()
        .map(|&x| {
            let x = x as usize;
            if x == previous {
                1.0 / return_p
            } else if g.has_edge(x, previous) {
                1.0
            } else {
                1.0 / in_out_q
            }
        })
        .collect()
}

/// Lazily built alias tables, one per directed edge `(previous -> current)`.
struct AliasCache<'g> {
    graph: &'g AttributedGraph,
    offsets: Vec<usize>,
    tables: Vec<OnceLock<Option<WeightedAliasIndex<f64>>>>,
    return_p: f64,
    in_out_q: f64,
}

impl<'g> AliasCache<'g> {
    fn new(graph: &'g AttributedGraph, cfg: &WalkConfig) -> Self {
        let mut offsets = Vec::with_capacity(graph.node_count() + 1);
        let mut acc = 0;
        for u in 0..graph.node_count() {
            offsets.push(acc);
            acc += graph.degree(u);
        }
        offsets.push(acc);
        Self {
            graph,
            offsets,
            tables: (0..acc).map(|_| OnceLock::new()).collect(),
            return_p: cfg.return_p,
            in_out_q: cfg.in_out_q,
        }
    }

    fn table(&self, previous: usize, current: usize) -> Option<&WeightedAliasIndex<f64>> {
        let pos = self
            .graph
            .neighbors(previous)
            .binary_search(&(current as u32))
            .expect("walk step follows an edge");
        self.tables[self.offsets[previous] + pos]
            .get_or_init(|| {
                let weights =
                    transition_weights(self.graph, previous, current, self.return_p, self.in_out_q);
                WeightedAliasIndex::new(weights).ok()
            })
            .as_ref()
    }
}

/// Generates `walks_per_node` walks from every node with at least one
/// neighbour.
///
/// Walks are ordered by round, then by start node. Each walk draws from its
/// own RNG stream derived from `cfg.seed`, so the output does not depend on
/// the thread schedule.
pub fn generate_walks(g: &AttributedGraph, cfg: &WalkConfig) -> Result<WalkReport> {
    cfg.validate()?;
    if g.node_count() == 0 {
        return Err(Error::Domain("cannot walk an empty graph".into()));
    }
    let starts: Vec<usize> = (0..g.node_count()).filter(|&u| g.degree(u) > 0).collect();
    let skipped: Vec<usize> = (0..g.node_count()).filter(|&u| g.degree(u) == 0).collect();
    let cache = AliasCache::new(g, cfg);

    let jobs: Vec<(usize, usize)> = (0..cfg.walks_per_node)
        .flat_map(|round| starts.iter().map(move |&s| (round, s)))
        .collect();
    let walks = jobs
        .par_iter()
        .map(|&(round, start)| {
            let stream = util::mix_seed(cfg.seed, round as u64);
            let mut rng = util::rng(util::mix_seed(stream, start as u64));
            walk_from(&cache, start, cfg.walk_length, &mut rng)
        })
        .collect();
    Ok(WalkReport { walks, skipped })
}

fn walk_from(cache: &AliasCache<'_>, start: usize, length: usize, rng: &mut util::Rng) -> Walk {
    let g = cache.graph;
    let mut nodes = Vec::with_capacity(length);
    nodes.push(start as u32);
    while nodes.len() < length {
        let current = *nodes.last().unwrap() as usize;
        let neighbors = g.neighbors(current);
        if neighbors.is_empty() {
            break;
        }
        let next = if nodes.len() == 1 {
            neighbors[rng.random_range(0..neighbors.len())]
        } else {
            let previous = nodes[nodes.len() - 2] as usize;
            match cache.table(previous, current) {
                Some(table) => neighbors[table.sample(rng)],
                None => break,
            }
        };
        nodes.push(next);
    }
    Walk { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AttributeRecord;

    fn graph(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
        AttributedGraph::new("t", vec![AttributeRecord::missing(); n], edges.iter().copied()).unwrap()
    }

    fn cfg(walks: usize, len: usize, p: f64, q: f64) -> WalkConfig {
        WalkConfig {
            walks_per_node: walks,
            walk_length: len,
            return_p: p,
            in_out_q: q,
            seed: 11,
            ..WalkConfig::default()
        }
    }

    #[test]
    fn star_walks_alternate_through_hub() {
        let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let report = generate_walks(&star, &cfg(10, 9, 1.0, 0.8)).unwrap();
        for walk in report.walks.iter().filter(|w| w.nodes[0] != 0) {
            assert_eq!(walk.nodes.len(), 9);
            for (i, &n) in walk.nodes.iter().enumerate() {
                assert_eq!(n == 0, i % 2 == 1, "walk {:?}", walk.nodes);
            }
        }
    }

    #[test]
    fn infinite_q_bounces_on_path() {
        let path = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let report = generate_walks(&path, &cfg(20, 12, 1.0, f64::INFINITY)).unwrap();
        for walk in report.walks.iter().filter(|w| w.nodes[0] == 0) {
            for (i, &n) in walk.nodes.iter().enumerate() {
                assert_eq!(n as usize, i % 2);
            }
        }
    }

    #[test]
    fn isolated_nodes_are_reported() {
        let g = graph(4, &[(0, 1)]);
        let report = generate_walks(&g, &cfg(3, 5, 1.0, 1.0)).unwrap();
        assert_eq!(report.skipped, vec![2, 3]);
        assert_eq!(report.walks.len(), 6);
    }

    #[test]
    fn weights_follow_bias_rule() {
        // triangle 0-1-2 plus tail 1-3
        let g = graph(4, &[(0, 1), (1, 2), (0, 2), (1, 3)]);
        let w = transition_weights(&g, 0, 1, 2.0, 4.0);
        // neighbours of 1: [0, 2, 3]
        assert_eq!(w, vec![0.5, 1.0, 0.25]);
    }

    #[test]
    fn deterministic_given_seed() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]);
        let a = generate_walks(&g, &cfg(4, 10, 0.5, 2.0)).unwrap();
        let b = generate_walks(&g, &cfg(4, 10, 0.5, 2.0)).unwrap();
        assert_eq!(a.walks, b.walks);
    }
}
