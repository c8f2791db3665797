//! Attributed undirected graphs.
//!
//! Node ids are re-indexed densely at load time (ascending original id) and
//! neighbour lists are kept sorted so that common-neighbour queries are a
//! linear merge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Header of the attribute CSV file.
pub const ATTRIBUTE_HEADER: &str = "node_id,status,gender,major,minor,dorm,year,high_school";

/// Per-node demographic record. Code `0` means missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub status: i64,
    pub gender: i64,
    pub major: i64,
    pub minor: i64,
    pub dorm: i64,
    pub year: Option<i32>,
    pub high_school: i64,
}

impl AttributeRecord {
    pub fn missing() -> Self {
        Self::default()
    }
}

/// Structural summary of one network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n: usize,
    pub m: usize,
    /// Average degree, `2m / n`.
    pub d: f64,
    /// Average local clustering coefficient over all nodes.
    pub c: f64,
}

/// Immutable undirected simple graph with per-node attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    network_id: String,
    adjacency: Vec<Vec<u32>>,
    attributes: Vec<AttributeRecord>,
    original_ids: Vec<u64>,
    edge_count: usize,
}

impl AttributedGraph {
    /// Builds a graph over nodes `0..attributes.len()`.
    ///
    /// Duplicate and reversed edges are merged. Self-loops are a validation
    /// error, out-of-range endpoints a referential error.
    pub fn new<I>(network_id: impl Into<String>, attributes: Vec<AttributeRecord>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = attributes.len();
        let original_ids = (0..n as u64).collect();
        Self::build(network_id.into(), attributes, original_ids, edges)
    }

    fn build<I>(
        network_id: String,
        attributes: Vec<AttributeRecord>,
        original_ids: Vec<u64>,
        edges: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = attributes.len();
        if n > u32::MAX as usize {
            return Err(Error::Validation(format!("too many nodes: {n}")));
        }
        let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Referential(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop on node {u}")));
            }
            adjacency[u].push(v as u32);
            adjacency[v].push(u as u32);
        }
        let mut twice_m = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            twice_m += list.len();
        }
        Ok(Self {
            network_id,
            adjacency,
            attributes,
            original_ids,
            edge_count: twice_m / 2,
        })
    }

    pub fn network_id(&self) -> &str {
        &self.network_id
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    /// Sorted neighbour list of `u`.
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adjacency[u]
    }

    pub fn attributes(&self, u: usize) -> &AttributeRecord {
        &self.attributes[u]
    }

    pub fn original_id(&self, u: usize) -> u64 {
        self.original_ids[u]
    }

    /// Dense index for an original node id.
    pub fn index_of(&self, original: u64) -> Option<usize> {
        self.original_ids.binary_search(&original).ok()
    }

    pub fn contains_node(&self, u: usize) -> bool {
        u < self.node_count()
    }

    pub(crate) fn check_node(&self, u: usize) -> Result<()> {
        if self.contains_node(u) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "node {u} not in network `{}` ({} nodes)",
                self.network_id,
                self.node_count()
            )))
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        if !self.contains_node(u) || !self.contains_node(v) {
            return false;
        }
        let (a, b) = if self.degree(u) <= self.degree(v) { (u, v) } else { (v, u) };
        self.adjacency[a].binary_search(&(b as u32)).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Common neighbours of `u` and `v`, ascending.
    pub fn common_neighbors(&self, u: usize, v: usize) -> CommonNeighbors<'_> {
        CommonNeighbors {
            a: &self.adjacency[u],
            b: &self.adjacency[v],
        }
    }

    /// Copy of this graph with the given edges removed. Every removed edge
    /// must exist.
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = self.adjacency.clone();
        for &(u, v) in removed {
            if !self.has_edge(u, v) {
                return Err(Error::Domain(format!("cannot remove missing edge ({u}, {v})")));
            }
            for (a, b) in [(u, v), (v, u)] {
                let list = &mut adjacency[a];
                if let Ok(pos) = list.binary_search(&(b as u32)) {
                    list.remove(pos);
                }
            }
        }
        let twice_m: usize = adjacency.iter().map(Vec::len).sum();
        Ok(Self {
            network_id: self.network_id.clone(),
            adjacency,
            attributes: self.attributes.clone(),
            original_ids: self.original_ids.clone(),
            edge_count: twice_m / 2,
        })
    }

    /// Writes the edge list using original node ids.
    pub fn write_edge_file(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.edge_count * 12);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{} {}", self.original_ids[u], self.original_ids[v]);
        }
        util::write_file(path, out)
    }

    pub fn write_attribute_file(&self, path: &Path) -> Result<()> {
        let mut out = String::from(ATTRIBUTE_HEADER);
        out.push('\n');
        for (u, a) in self.attributes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.original_ids[u],
                a.status,
                a.gender,
                a.major,
                a.minor,
                a.dorm,
                a.year.unwrap_or(0),
                a.high_school
            );
        }
        util::write_file(path, out)
    }
}

/// Sorted-merge iterator over the intersection of two neighbour lists.
pub struct CommonNeighbors<'a> {
    a: &'a [u32],
    b: &'a [u32],
}

impl Iterator for CommonNeighbors<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while let (Some(&x), Some(&y)) = (self.a.first(), self.b.first()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => self.a = &self.a[1..],
                std::cmp::Ordering::Greater => self.b = &self.b[1..],
                std::cmp::Ordering::Equal => {
                    self.a = &self.a[1..];
                    self.b = &self.b[1..];
                    return Some(x as usize);
                }
            }
        }
        None
    }
}

/// Loads a graph from an edge list and an attribute CSV.
///
/// Nodes are defined by the attribute file; every edge endpoint must appear
/// there.
pub fn load_graph(edge_file: &Path, attribute_file: &Path, network_id: &str) -> Result<AttributedGraph> {
    let (original_ids, attributes) = parse_attributes(attribute_file)?;
    let text = util::read_to_string(edge_file)?;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: edge_file.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.len() != 2 {
            return Err(parse_err(format!("expected two node ids, got {:?}", line)));
        }
        let mut ends = [0usize; 2];
        for (slot, tok) in ends.iter_mut().zip(&tokens) {
            let id: u64 = tok
                .parse()
                .map_err(|_| parse_err(format!("invalid node id {tok:?}")))?;
            *slot = original_ids.binary_search(&id).map_err(|_| {
                Error::Referential(format!(
                    "{}:{}: node {id} is not in the attribute file",
                    edge_file.display(),
                    lineno + 1
                ))
            })?;
        }
        if ends[0] == ends[1] {
            return Err(Error::Validation(format!(
                "{}:{}: self-loop on node {}",
                edge_file.display(),
                lineno + 1,
                tokens[0]
            )));
        }
        edges.push((ends[0], ends[1]));
    }
    AttributedGraph::build(network_id.to_string(), attributes, original_ids, edges)
}

fn parse_attributes(path: &Path) -> Result<(Vec<u64>, Vec<AttributeRecord>)> {
    let text = util::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == ATTRIBUTE_HEADER => {}
        Some((_, h)) => {
            return Err(parse_err(1, format!("expected header `{ATTRIBUTE_HEADER}`, got `{h}`")))
        }
        None => return Err(parse_err(1, "empty attribute file".into())),
    }
    let mut rows: Vec<(u64, AttributeRecord)> = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(parse_err(lineno + 1, format!("expected 8 columns, got {}", fields.len())));
        }
        let code = |i: usize| -> Result<i64> {
            if fields[i].is_empty() {
                return Ok(0);
            }
            fields[i]
                .parse::<i64>()
                .map_err(|_| parse_err(lineno + 1, format!("invalid integer {:?}", fields[i])))
        };
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno + 1, format!("invalid node id {:?}", fields[0])))?;
        let year = match code(6)? {
            0 => None,
            y if (1900..=2100).contains(&y) => Some(y as i32),
            y => return Err(parse_err(lineno + 1, format!("implausible year {y}"))),
        };
        rows.push((
            id,
            AttributeRecord {
                status: code(1)?,
                gender: code(2)?,
                major: code(3)?,
                minor: code(4)?,
                dorm: code(5)?,
                year,
                high_school: code(7)?,
            },
        ));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Validation(format!(
            "{}: duplicate node id {}",
            path.display(),
            w[0].0
        )));
    }
    Ok(rows.into_iter().unzip())
}

/// Local clustering coefficient: `2 T(v) / (deg (deg - 1))`, zero when `deg < 2`.
pub fn clustering_coefficient(g: &AttributedGraph, node: usize) -> Result<f64> {
    g.check_node(node)?;
    Ok(local_clustering(g, node))
}

fn local_clustering(g: &AttributedGraph, v: usize) -> f64 {
    let deg = g.degree(v);
    if deg < 2 {
        return 0.0;
    }
    // each triangle through v is seen from both of its other corners
    let twice_triangles: usize = g
        .neighbors(v)
        .iter()
        .map(|&w| g.common_neighbors(v, w as usize).count())
        .sum();
    twice_triangles as f64 / (deg * (deg - 1)) as f64
}

pub fn graph_stats(g: &AttributedGraph) -> Result<GraphStats> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Domain(format!("network `{}` is empty", g.network_id())));
    }
    let sum_c: f64 = (0..n)
        .into_par_iter()
        .map(|v| local_clustering(g, v))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let m = g.edge_count();
    Ok(GraphStats {
        n,
        m,
        d: 2.0 * m as f64 / n as f64,
        c: sum_c / n as f64,
    })
}

/// `(degree, count)` pairs in ascending degree order.
pub fn degree_histogram(g: &AttributedGraph) -> Vec<(usize, usize)> {
    let mut counts = BTreeMap::new();
    for u in 0..g.node_count() {
        *counts.entry(g.degree(u)).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}

pub fn degree_histogram_csv(hist: &[(usize, usize)]) -> String {
    let mut out = String::from("degree,count\n");
    for (d, c) in hist {
        let _ = writeln!(out, "{d},{c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
        AttributedGraph::new("t", vec![AttributeRecord::missing(); n], edges.iter().copied()).unwrap()
    }

    #[test]
    fn dedups_reversed_edges() {
        let g = plain(3, &[(0, 1), (1, 0), (1, 2)]);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn rejects_self_loop() {
        let err = AttributedGraph::new("t", vec![AttributeRecord::missing(); 4], [(3, 3)]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn path_degrees() {
        let g = plain(4, &[(0, 1), (1, 2), (2, 3)]);
        let degrees: Vec<_> = (0..4).map(|u| g.degree(u)).collect();
        assert_eq!(degrees, vec![1, 2, 2, 1]);
    }

    #[test]
    fn clustering_examples() {
        let k3 = plain(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(clustering_coefficient(&k3, 0).unwrap(), 1.0);
        let path = plain(3, &[(0, 1), (1, 2)]);
        assert_eq!(clustering_coefficient(&path, 1).unwrap(), 0.0);
        // K4 minus (1,3): node 0 has neighbours 1,2,3 and triangles 012, 023
        let k4m = plain(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]);
        assert!((clustering_coefficient(&k4m, 0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(clustering_coefficient(&k4m, 9), Err(Error::Domain(_))));
    }

    #[test]
    fn stats_examples() {
        let k3 = plain(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(graph_stats(&k3).unwrap(), GraphStats { n: 3, m: 3, d: 2.0, c: 1.0 });
        let path = graph_stats(&plain(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!((path.n, path.m, path.c), (3, 2, 0.0));
        assert!((path.d - 4.0 / 3.0).abs() < 1e-15);
        let star = graph_stats(&plain(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])).unwrap();
        assert_eq!(star, GraphStats { n: 5, m: 4, d: 1.6, c: 0.0 });
        assert!(matches!(graph_stats(&plain(0, &[])), Err(Error::Domain(_))));
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(degree_histogram(&plain(3, &[(0, 1), (1, 2), (0, 2)])), vec![(2, 3)]);
        let star = plain(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(degree_histogram(&star), vec![(1, 4), (4, 1)]);
        assert_eq!(degree_histogram(&plain(3, &[(0, 1), (1, 2)])), vec![(1, 2), (2, 1)]);
        assert_eq!(degree_histogram_csv(&[(1, 2)]), "degree,count\n1,2\n");
    }

    #[test]
    fn without_edges_keeps_isolated_nodes() {
        let g = plain(3, &[(0, 1), (1, 2)]);
        let h = g.without_edges(&[(1, 0)]).unwrap();
        assert_eq!(h.edge_count(), 1);
        assert_eq!(h.degree(0), 0);
        assert_eq!(h.node_count(), 3);
        assert!(g.without_edges(&[(0, 2)]).is_err());
    }
}
