//! Symmetric normalized Laplacian `L = I - D^{-1/2} W D^{-1/2}` as a matrix-free operator.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Normalized Laplacian of a graph. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    graph: Arc<Graph>,
    inv_sqrt_degrees: Vec<f64>,
    /// `W_ij / sqrt(D_ii D_jj)` aligned with the graph's CSR layout.
    normalized_weights: Vec<f64>,
}

/// Builds the normalized Laplacian, failing on nodes without edges.
pub fn build_normalized_laplacian(graph: impl Into<Arc<Graph>>) -> Result<LaplacianOperator> {
    LaplacianOperator::new(graph)
}

impl LaplacianOperator {
    pub fn new(graph: impl Into<Arc<Graph>>) -> Result<Self> {
        let graph = graph.into();
        let degrees = graph.degrees();
        if let Some(v) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::IsolatedNode(v));
        }
        let inv_sqrt_degrees: Vec<f64> = degrees.iter().map(|d| d.sqrt().recip()).collect();
        let (row_ptr, col_idx, weights) = graph.csr();
        let mut normalized_weights = vec![0.0; weights.len()];
        for v in 0..graph.num_nodes() {
            for e in row_ptr[v]..row_ptr[v + 1] {
                normalized_weights[e] =
                    weights[e] * inv_sqrt_degrees[v] * inv_sqrt_degrees[col_idx[e]];
            }
        }
        Ok(Self {
            graph,
            inv_sqrt_degrees,
            normalized_weights,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn inv_sqrt_degrees(&self) -> &[f64] {
        &self.inv_sqrt_degrees
    }

    /// The vector with entries `sqrt(D_ii)`, which spans part of the null space.
    pub fn sqrt_degrees(&self) -> Vec<f64> {
        self.inv_sqrt_degrees.iter().map(|d| d.recip()).collect()
    }

    /// `y = D^{-1/2} W D^{-1/2} x`, i.e. `(I - L) x`. Unchecked lengths.
    #[inline]
    pub(crate) fn adjacency_apply(&self, x: &[f64], y: &mut [f64]) {
        let (row_ptr, col_idx, _) = self.graph.csr();
        for (v, yv) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for e in row_ptr[v]..row_ptr[v + 1] {
                acc += self.normalized_weights[e] * x[col_idx[e]];
            }
            *yv = acc;
        }
    }

    /// `out = 2 (L - I) cur - prev`, one step of the shifted Chebyshev recurrence.
    #[inline]
    pub(crate) fn chebyshev_step(&self, cur: &[f64], prev: &[f64], out: &mut [f64]) {
        let (row_ptr, col_idx, _) = self.graph.csr();
        for (v, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for e in row_ptr[v]..row_ptr[v + 1] {
                acc += self.normalized_weights[e] * cur[col_idx[e]];
            }
            *o = -2.0 * acc - prev[v];
        }
    }

    /// Writes `L x` into `y`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.num_nodes();
        for len in [x.len(), y.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        self.adjacency_apply(x, y);
        for (yv, xv) in y.iter_mut().zip(x) {
            *yv = xv - *yv;
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.num_nodes()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `L X` for an `N x k` block, columns processed independently.
    pub fn matmat(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.num_nodes();
        if x.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.nrows(),
            });
        }
        let mut y = DMatrix::zeros(n, x.ncols());
        if n == 0 || x.ncols() == 0 {
            return Ok(y);
        }
        y.as_mut_slice()
            .par_chunks_mut(n)
            .zip(x.as_slice().par_chunks(n))
            .for_each(|(yc, xc)| {
                self.adjacency_apply(xc, yc);
                for (yv, xv) in yc.iter_mut().zip(xc) {
                    *yv = xv - *yv;
                }
            });
        Ok(y)
    }

    /// Dense `N x N` materialization. Intended for small graphs and oracles.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.num_nodes();
        let (row_ptr, col_idx, _) = self.graph.csr();
        let mut l = DMatrix::identity(n, n);
        for v in 0..n {
            for e in row_ptr[v]..row_ptr[v + 1] {
                l[(v, col_idx[e])] -= self.normalized_weights[e];
            }
        }
        l
    }
}
