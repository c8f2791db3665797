use std::cmp::Ordering;
use std::fmt::Write as _;

use super::{generate_walks, train_embeddings, EmbeddingTable, WalkConfig};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

/// One evaluated grid point.
#[derive(Debug, Clone)]
pub struct GridEntry {
    pub config: WalkConfig,
    /// `Err` holds the failure message of a config that could not be scored.
    pub score: Result<f64, String>,
    /// 1-based rank; `None` for failed configs.
    pub rank: Option<usize>,
}

/// Trains one embedding per config and ranks the configs by the evaluator's
/// score, best first. Equal scores prefer the smaller embedding dimension.
/// Failed configs are kept, unranked, at the end.
pub fn grid_search_embeddings<F>(g: &AttributedGraph, grid: &[WalkConfig], mut evaluator: F) -> Result<Vec<GridEntry>>
where
    F: FnMut(&EmbeddingTable) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::Domain("empty hyperparameter grid".into()));
    }
    let mut entries: Vec<(usize, GridEntry)> = grid
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let score = generate_walks(g, cfg)
                .and_then(|report| train_embeddings(&report.walks, cfg, g.node_count()))
                .and_then(|table| evaluator(&table.with_network_id(g.network_id())))
                .and_then(|s| {
                    if s.is_finite() {
                        Ok(s)
                    } else {
                        Err(Error::Numeric(format!("evaluator returned {s}")))
                    }
                })
                .map_err(|e| {
                    log::warn!("grid config {i} failed: {e}");
                    e.to_string()
                });
            (i, GridEntry { config: cfg.clone(), score, rank: None })
        })
        .collect();

    entries.sort_by(|(ia, a), (ib, b)| match (&a.score, &b.score) {
        (Ok(sa), Ok(sb)) => sb
            .partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then(a.config.dimensions.cmp(&b.config.dimensions))
            .then(ia.cmp(ib)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => ia.cmp(ib),
    });
    let mut rank = 0;
    Ok(entries
        .into_iter()
        .map(|(_, mut e)| {
            if e.score.is_ok() {
                rank += 1;
                e.rank = Some(rank);
            }
            e
        })
        .collect())
}

pub fn grid_report_csv(entries: &[GridEntry]) -> String {
    let mut out = String::from("dims,walks,length,p,q,score,rank\n");
    for e in entries {
        let c = &e.config;
        let score = e.score.as_ref().map(|s| s.to_string()).unwrap_or_default();
        let rank = e.rank.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.dimensions, c.walks_per_node, c.walk_length, c.return_p, c.in_out_q, score, rank
        );
    }
    out
}
