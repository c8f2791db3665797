use std::fmt::Write as _;
use std::path::Path;

use super::WalkConfig;
use crate::error::{Error, Result};
use crate::util;

const BINARY_MAGIC: &[u8; 8] = b"LPEMB\0\0\x01";

/// One dense vector per node of a single network.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vectors: Vec<f64>,
    dimensions: usize,
    pub config: WalkConfig,
    pub network_id: String,
}

impl EmbeddingTable {
    pub fn from_flat(vectors: Vec<f64>, dimensions: usize, config: WalkConfig, network_id: &str) -> Result<Self> {
        if dimensions == 0 || vectors.len() % dimensions != 0 {
            return Err(Error::Domain(format!(
                "{} values do not form rows of width {dimensions}",
                vectors.len()
            )));
        }
        if let Some(bad) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite embedding value in row {}", bad / dimensions)));
        }
        Ok(Self {
            vectors,
            dimensions,
            config,
            network_id: network_id.to_string(),
        })
    }

    pub fn with_network_id(mut self, network_id: &str) -> Self {
        self.network_id = network_id.to_string();
        self
    }

    pub fn node_count(&self) -> usize {
        self.vectors.len() / self.dimensions
    }

    pub fn dimensions(&self) -> usize {
        self.dimensions
    }

    pub fn vector(&self, node: usize) -> Option<&[f64]> {
        (node < self.node_count()).then(|| &self.vectors[node * self.dimensions..(node + 1) * self.dimensions])
    }

    /// Text form: a `node_count dimensions` header, then `node_id v1 .. vD`
    /// per line. Values use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.node_count(), self.dimensions);
        for node in 0..self.node_count() {
            let _ = write!(out, "{node}");
            for v in self.vector(node).unwrap() {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, config: WalkConfig, network_id: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: "<embedding>".into(),
            line,
            message: msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(1, format!("invalid header {header:?}"))))
            .collect::<Result<_>>()?;
        let [n, dim] = head[..] else {
            return Err(bad(1, format!("invalid header {header:?}")));
        };
        let mut vectors = vec![f64::NAN; n * dim];
        let mut seen = vec![false; n];
        for (lineno, line) in lines {
            let mut tokens = line.split_whitespace();
            let node: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .filter(|&id| id < n)
                .ok_or_else(|| bad(lineno + 1, "invalid node id".into()))?;
            let values: Vec<f64> = tokens
                .map(|t| t.parse().map_err(|_| bad(lineno + 1, format!("invalid value {t:?}"))))
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(bad(lineno + 1, format!("expected {dim} values, got {}", values.len())));
            }
            vectors[node * dim..(node + 1) * dim].copy_from_slice(&values);
            seen[node] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Domain(format!("embedding file has no vector for node {missing}")));
        }
        Self::from_flat(vectors, dim, config, network_id)
    }

    /// Binary form: magic, little-endian `u64` node count and dimension,
    /// then the row-major `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.vectors.len() * 8);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.node_count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dimensions as u64).to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], config: WalkConfig, network_id: &str) -> Result<Self> {
        let corrupt = |m: &str| Error::Serde(format!("embedding binary: {m}"));
        if bytes.len() < 24 || &bytes[..8] != BINARY_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let body = &bytes[24..];
        if body.len() != n * dim * 8 {
            return Err(corrupt("length does not match header"));
        }
        let vectors = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_flat(vectors, dim, config, network_id)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        util::write_file(path, self.to_text())
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        util::write_file(path, self.to_bytes())
    }

    pub fn read_binary(path: &Path, config: WalkConfig, network_id: &str) -> Result<Self> {
        Self::from_bytes(&util::read_bytes(path)?, config, network_id)
    }
}

/// Hadamard (elementwise) product of the two node vectors.
pub fn edge_embedding(table: &EmbeddingTable, u: usize, v: usize) -> Result<Vec<f64>> {
    let missing = |n: usize| Error::Domain(format!("no embedding vector for node {n} in `{}`", table.network_id));
    let a = table.vector(u).ok_or_else(|| missing(u))?;
    let b = table.vector(v).ok_or_else(|| missing(v))?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}
