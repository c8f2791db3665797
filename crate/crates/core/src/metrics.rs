//! Neighbour-based similarity scores for node pairs.
//!
//! All four scores are symmetric and computed from the sorted neighbour
//! lists of the two endpoints:
//!
//! | score | definition |
//! |-------|------------|
//! | Jaccard (JC) | `|Γ(u) ∩ Γ(v)| / |Γ(u) ∪ Γ(v)|`, 0 if the union is empty |
//! | Adamic–Adar (AA) | `Σ_{z ∈ Γ(u) ∩ Γ(v)} 1 / ln |Γ(z)|` |
//! | Preferential attachment (PA) | `|Γ(u)| · |Γ(v)|` |
//! | Resource allocation (RAI) | `Σ_{z ∈ Γ(u) ∩ Γ(v)} 1 / |Γ(z)|` |

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub u: usize,
    pub v: usize,
    pub jc: f64,
    pub aa: f64,
    pub pa: f64,
    pub rai: f64,
}

fn check_pair(g: &AttributedGraph, u: usize, v: usize) -> Result<()> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(Error::Domain(format!("pair ({u}, {v}) has identical endpoints")));
    }
    Ok(())
}

pub fn jaccard(g: &AttributedGraph, u: usize, v: usize) -> Result<f64> {
    check_pair(g, u, v)?;
    Ok(jaccard_unchecked(g, u, v))
}

pub fn adamic_adar(g: &AttributedGraph, u: usize, v: usize) -> Result<f64> {
    check_pair(g, u, v)?;
    Ok(adamic_adar_unchecked(g, u, v))
}

pub fn preferential_attachment(g: &AttributedGraph, u: usize, v: usize) -> Result<f64> {
    check_pair(g, u, v)?;
    Ok((g.degree(u) * g.degree(v)) as f64)
}

pub fn resource_allocation(g: &AttributedGraph, u: usize, v: usize) -> Result<f64> {
    check_pair(g, u, v)?;
    Ok(resource_allocation_unchecked(g, u, v))
}

fn jaccard_unchecked(g: &AttributedGraph, u: usize, v: usize) -> f64 {
    let common = g.common_neighbors(u, v).count();
    let union = g.degree(u) + g.degree(v) - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

fn adamic_adar_unchecked(g: &AttributedGraph, u: usize, v: usize) -> f64 {
    g.common_neighbors(u, v)
        .map(|z| {
            let d = g.degree(z);
            // z is adjacent to both u and v
            debug_assert!(d >= 2);
            1.0 / (d as f64).ln()
        })
        .sum()
}

fn resource_allocation_unchecked(g: &AttributedGraph, u: usize, v: usize) -> f64 {
    g.common_neighbors(u, v).map(|z| 1.0 / g.degree(z) as f64).sum()
}

/// All four scores in a single pass over the common neighbourhood.
fn score_unchecked(g: &AttributedGraph, u: usize, v: usize) -> PairScore {
    let (mut common, mut aa, mut rai) = (0usize, 0.0, 0.0);
    for z in g.common_neighbors(u, v) {
        let d = g.degree(z) as f64;
        common += 1;
        aa += 1.0 / d.ln();
        rai += 1.0 / d;
    }
    let (du, dv) = (g.degree(u), g.degree(v));
    let union = du + dv - common;
    PairScore {
        u,
        v,
        jc: if union == 0 { 0.0 } else { common as f64 / union as f64 },
        aa,
        pa: (du * dv) as f64,
        rai,
    }
}

/// Scores every pair; element `i` corresponds to `pairs[i]`.
///
/// Pairs are validated up front so the first invalid pair is reported with
/// its index. Scoring itself runs in parallel.
pub fn score_pairs(g: &AttributedGraph, pairs: &[(usize, usize)]) -> Result<Vec<PairScore>> {
    for (index, &(u, v)) in pairs.iter().enumerate() {
        check_pair(g, u, v).map_err(|e| Error::InvalidPair {
            index,
            message: e.to_string(),
        })?;
    }
    Ok(pairs
        .par_iter()
        .map(|&(u, v)| score_unchecked(g, u, v))
        .collect())
}

pub fn pair_scores_csv(scores: &[PairScore]) -> String {
    let mut out = String::from("u,v,jc,aa,pa,rai\n");
    for s in scores {
        let _ = writeln!(out, "{},{},{},{},{},{}", s.u, s.v, s.jc, s.aa, s.pa, s.rai);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AttributeRecord;

    fn graph(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
        AttributedGraph::new("t", vec![AttributeRecord::missing(); n], edges.iter().copied()).unwrap()
    }

    // nodes 1..=4 with edges {(1,2),(1,3),(2,3),(3,4)}; node 0 unused
    fn four() -> AttributedGraph {
        graph(5, &[(1, 2), (1, 3), (2, 3), (3, 4)])
    }

    #[test]
    fn jaccard_examples() {
        let path = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(jaccard(&path, 0, 2).unwrap(), 1.0);
        assert_eq!(jaccard(&graph(2, &[]), 0, 1).unwrap(), 0.0);
        assert_eq!(jaccard(&four(), 1, 4).unwrap(), 0.5);
    }

    #[test]
    fn adamic_adar_examples() {
        let g = four();
        let expected = 1.0 / 3f64.ln();
        assert_eq!(adamic_adar(&graph(2, &[]), 0, 1).unwrap(), 0.0);
        assert!((adamic_adar(&g, 1, 4).unwrap() - expected).abs() < 1e-15);
        assert!((adamic_adar(&g, 2, 4).unwrap() - 0.9102392266268373).abs() < 1e-12);
    }

    #[test]
    fn preferential_attachment_examples() {
        assert_eq!(preferential_attachment(&four(), 0, 3).unwrap(), 0.0);
        assert_eq!(preferential_attachment(&four(), 1, 4).unwrap(), 2.0);
        let k4 = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(preferential_attachment(&k4, 1, 2).unwrap(), 9.0);
    }

    #[test]
    fn resource_allocation_examples() {
        assert_eq!(resource_allocation(&graph(2, &[]), 0, 1).unwrap(), 0.0);
        assert!((resource_allocation(&four(), 1, 4).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let k3 = graph(4, &[(1, 2), (1, 3), (2, 3)]);
        assert_eq!(resource_allocation(&k3, 1, 2).unwrap(), 0.5);
    }

    #[test]
    fn invalid_pairs() {
        let g = four();
        assert!(matches!(jaccard(&g, 2, 2), Err(Error::Domain(_))));
        assert!(matches!(adamic_adar(&g, 1, 99), Err(Error::Domain(_))));
        match score_pairs(&g, &[(1, 2), (3, 3), (1, 99)]) {
            Err(Error::InvalidPair { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn batch_examples() {
        let g = four();
        assert!(score_pairs(&g, &[]).unwrap().is_empty());
        let s = score_pairs(&g, &[(1, 4)]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].jc, jaccard(&g, 1, 4).unwrap());
        assert_eq!(s[0].aa, adamic_adar(&g, 1, 4).unwrap());
        assert_eq!(s[0].pa, preferential_attachment(&g, 1, 4).unwrap());
        assert_eq!(s[0].rai, resource_allocation(&g, 1, 4).unwrap());
        assert!(pair_scores_csv(&s).starts_with("u,v,jc,aa,pa,rai\n1,4,0.5,"));
    }
}
