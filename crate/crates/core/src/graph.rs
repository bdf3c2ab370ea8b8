//! Undirected weighted graphs in compressed sparse row form.
//!
//! Edges are stored once per undirected pair in [`Graph::edges`]; the CSR
//! arrays hold both orientations so that neighbour sweeps need no branching.
//!
//! Text format (1-based node indices):
//!
//! ```text
//! N E
//! i j w
//! ...
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An undirected edge `(i, j, w)` with 0-based endpoints.
pub type Edge = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
}

impl Graph {
    /// Builds a graph from a list of undirected edges, each pair listed once.
    ///
    /// Rejects self-loops, out-of-range endpoints, non-positive weights and
    /// pairs that appear twice in either orientation.
    pub fn from_edges(num_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidParams("graph needs at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut counts = vec![0usize; num_nodes];
        for &(i, j, w) in &edges {
            for index in [i, j] {
                if index >= num_nodes {
                    return Err(Error::NodeOutOfRange { index, n: num_nodes });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight { i, j, w });
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge(i, j));
            }
            counts[i] += 1;
            counts[j] += 1;
        }

        let mut row_ptr = vec![0usize; num_nodes + 1];
        for (v, c) in counts.iter().enumerate() {
            row_ptr[v + 1] = row_ptr[v] + c;
        }
        let nnz = row_ptr[num_nodes];
        let mut col_idx = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut fill = row_ptr[..num_nodes].to_vec();
        for &(i, j, w) in &edges {
            for (a, b) in [(i, j), (j, i)] {
                col_idx[fill[a]] = b;
                weights[fill[a]] = w;
                fill[a] += 1;
            }
        }
        // sort each row by column for cache-friendly sweeps and a canonical layout
        for v in 0..num_nodes {
            let (lo, hi) = (row_ptr[v], row_ptr[v + 1]);
            let mut row: Vec<(usize, f64)> = col_idx[lo..hi]
                .iter()
                .copied()
                .zip(weights[lo..hi].iter().copied())
                .collect();
            row.sort_by_key(|&(c, _)| c);
            for (k, (c, w)) in row.into_iter().enumerate() {
                col_idx[lo + k] = c;
                weights[lo + k] = w;
            }
        }

        Ok(Self {
            num_nodes,
            edges,
            row_ptr,
            col_idx,
            weights,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `v` with edge weights.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[v], self.row_ptr[v + 1]);
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }

    pub(crate) fn csr(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.row_ptr, &self.col_idx, &self.weights)
    }

    /// Weighted degrees `D_ii = sum_j W_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.num_nodes)
            .map(|v| self.neighbors(v).map(|(_, w)| w).sum())
            .collect()
    }

    /// Number of connected components (breadth-first search).
    pub fn num_components(&self) -> usize {
        let mut label = vec![false; self.num_nodes];
        let mut queue = std::collections::VecDeque::new();
        let mut components = 0;
        for start in 0..self.num_nodes {
            if label[start] {
                continue;
            }
            components += 1;
            label[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for (u, _) in self.neighbors(v) {
                    if !label[u] {
                        label[u] = true;
                        queue.push_back(u);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.num_components() == 1
    }

    /// Parses the text format. Indices in the text are 1-based.
    pub fn read_text<R: Read>(reader: R) -> Result<Self> {
        let reader = BufReader::new(reader);
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header = header?;
        let mut fields = header.split_whitespace();
        let n: usize = parse_field(fields.next(), line_no, "N")?;
        let e: usize = parse_field(fields.next(), line_no, "E")?;

        let mut edges = Vec::with_capacity(e);
        for (line_no, line) in lines {
            let line = line?;
            let mut fields = line.split_whitespace();
            let i: usize = parse_field(fields.next(), line_no, "i")?;
            let j: usize = parse_field(fields.next(), line_no, "j")?;
            let w: f64 = parse_field(fields.next(), line_no, "w")?;
            if i == 0 || j == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "node indices are 1-based".into(),
                });
            }
            edges.push((i - 1, j - 1, w));
        }
        if edges.len() != e {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header announces {e} edges, found {}", edges.len()),
            });
        }
        Self::from_edges(n, edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_text(std::fs::File::open(path)?)
    }

    /// Serializes to the text format. Weights use Rust's shortest round-trip
    /// representation so that reloading is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 * (self.edges.len() + 1));
        let _ = writeln!(out, "{} {}", self.num_nodes, self.edges.len());
        for &(i, j, w) in &self.edges {
            let _ = writeln!(out, "{} {} {}", i + 1, j + 1, w);
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, name: &str) -> Result<T> {
    let field = field.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing field `{name}`"),
    })?;
    field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{name}` from {field:?}"),
    })
}
