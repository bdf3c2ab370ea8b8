//! Deterministic synthetic graph families.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::random::stream;

/// Attempts made before giving up on a connected sample.
pub const MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Gaussian-weighted symmetric k-NN graph on a 3-D Swiss roll.
    /// `width = None` uses the mean k-NN distance.
    SwissRoll { k_nn: usize, width: Option<f64> },
    /// Stochastic block model with equal blocks and unit weights.
    Community { n_comm: usize, p_in: f64, p_out: f64 },
    Cycle,
    Path,
    /// `rows x cols` 4-neighbour lattice; `N` must equal `rows * cols`.
    Grid { rows: usize, cols: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn swiss_roll(n: usize, seed: u64) -> Self {
        Self {
            family: Family::SwissRoll { k_nn: 10, width: None },
            n,
            seed,
        }
    }

    pub fn community(n: usize, n_comm: usize, seed: u64) -> Self {
        Self {
            family: Family::Community {
                n_comm,
                p_in: 0.2,
                p_out: 0.002,
            },
            n,
            seed,
        }
    }

    pub fn cycle(n: usize) -> Self {
        Self {
            family: Family::Cycle,
            n,
            seed: 0,
        }
    }

    pub fn path(n: usize) -> Self {
        Self {
            family: Family::Path,
            n,
            seed: 0,
        }
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        Self {
            family: Family::Grid { rows, cols },
            n: rows * cols,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        match &self.family {
            Family::SwissRoll { k_nn, width } => {
                if *k_nn == 0 || *k_nn >= self.n {
                    return bad(format!("k_nn = {k_nn} must be in [1, N)"));
                }
                if let Some(s) = width {
                    if !(s.is_finite() && *s > 0.0) {
                        return bad(format!("kernel width {s} must be positive"));
                    }
                }
            }
            Family::Community { n_comm, p_in, p_out } => {
                if *n_comm == 0 || *n_comm > self.n {
                    return bad(format!("n_comm = {n_comm} must be in [1, N]"));
                }
                if !(*p_out > 0.0 && p_in > p_out && *p_in <= 1.0) {
                    return bad(format!("need 0 < p_out < p_in <= 1, got p_in = {p_in}, p_out = {p_out}"));
                }
            }
            Family::Cycle => {
                if self.n < 3 {
                    return bad("cycle needs N >= 3".into());
                }
            }
            Family::Path => {
                if self.n < 2 {
                    return bad("path needs N >= 2".into());
                }
            }
            Family::Grid { rows, cols } => {
                if rows * cols != self.n || self.n < 2 {
                    return bad(format!("grid {rows} x {cols} does not have N = {} >= 2 nodes", self.n));
                }
            }
        }
        Ok(())
    }
}

/// Generates a connected graph, resampling random families up to ten times.
pub fn generate(spec: &GeneratorSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.n;
    let random = matches!(spec.family, Family::SwissRoll { .. } | Family::Community { .. });
    let attempts = if random { MAX_ATTEMPTS } else { 1 };
    for attempt in 0..attempts {
        let edges = match &spec.family {
            Family::SwissRoll { k_nn, width } => swiss_roll_edges(n, *k_nn, *width, spec.seed, attempt as u64),
            Family::Community { n_comm, p_in, p_out } => {
                community_edges(n, *n_comm, *p_in, *p_out, spec.seed, attempt as u64)
            }
            Family::Cycle => (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect(),
            Family::Path => (0..n - 1).map(|i| (i, i + 1, 1.0)).collect(),
            Family::Grid { rows, cols } => grid_edges(*rows, *cols),
        };
        let graph = Graph::from_edges(n, edges)?;
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(Error::Disconnected(attempts))
}

/// Points `(t cos t, y, t sin t)` with `t ~ U[3pi/2, 9pi/2]`, `y ~ U[0, 20]`.
pub fn swiss_roll_points(n: usize, seed: u64, attempt: u64) -> Vec<[f64; 3]> {
    let mut rng = stream(seed, &[0x5e, attempt]);
    (0..n)
        .map(|_| {
            let t = rng.random_range(1.5 * PI..4.5 * PI);
            let y = rng.random_range(0.0..20.0);
            [t * t.cos(), y, t * t.sin()]
        })
        .collect()
}

fn swiss_roll_edges(n: usize, k_nn: usize, width: Option<f64>, seed: u64, attempt: u64) -> Vec<Edge> {
    let points = swiss_roll_points(n, seed, attempt);
    let dist2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>();

    let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist2(&points[i], &points[j]), j))
                .collect();
            cand.select_nth_unstable_by(k_nn - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k_nn);
            cand.into_iter().map(|(d, j)| (j, d)).collect()
        })
        .collect();

    let s = width.unwrap_or_else(|| {
        let total: f64 = neighbors.iter().flatten().map(|(_, d)| d.sqrt()).sum();
        total / (n * k_nn) as f64
    });
    let denom = 2.0 * s * s;

    let mut pairs: Vec<(usize, usize, f64)> = neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |&(j, d)| (i.min(j), i.max(j), d)))
        .collect();
    pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    pairs.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    pairs
        .into_iter()
        .map(|(i, j, d)| (i, j, (-d / denom).exp().max(f64::MIN_POSITIVE)))
        .collect()
}

fn community_edges(n: usize, n_comm: usize, p_in: f64, p_out: f64, seed: u64, attempt: u64) -> Vec<Edge> {
    let block = |v: usize| v * n_comm / n;
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = stream(seed, &[0xc5, attempt, i as u64]);
            ((i + 1)..n)
                .filter_map(move |j| {
                    let p = if block(i) == block(j) { p_in } else { p_out };
                    (rng.random::<f64>() < p).then_some((i, j, 1.0))
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn grid_edges(rows: usize, cols: usize) -> Vec<Edge> {
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1), 1.0));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c), 1.0));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_is_two_regular() {
        let g = generate(&GeneratorSpec::cycle(8)).unwrap();
        assert_eq!(g.num_edges(), 8);
        assert!(g.degrees().iter().all(|&d| d == 2.0));
    }

    #[test]
    fn path_and_grid() {
        let g = generate(&GeneratorSpec::path(5)).unwrap();
        assert_eq!(g.num_edges(), 4);
        let g = generate(&GeneratorSpec::grid(3, 4)).unwrap();
        assert_eq!(g.num_edges(), 3 * 3 + 2 * 4);
        assert!(g.is_connected());
    }

    #[test]
    fn swiss_roll_is_deterministic() {
        let spec = GeneratorSpec::swiss_roll(500, 17);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert!(a.is_connected());
        // every node keeps at least its own k nearest neighbours
        assert!((0..500).all(|v| a.neighbors(v).count() >= 10));
        assert_ne!(a.to_text(), generate(&GeneratorSpec::swiss_roll(500, 18)).unwrap().to_text());
    }

    #[test]
    fn community_blocks() {
        let g = generate(&GeneratorSpec::community(400, 8, 3)).unwrap();
        let within = g.edges().iter().filter(|(i, j, _)| i / 50 == j / 50).count();
        assert!(within as f64 > 0.9 * g.num_edges() as f64);
    }

    #[test]
    fn invalid_parameters() {
        let mut spec = GeneratorSpec::community(100, 4, 0);
        spec.family = Family::Community {
            n_comm: 4,
            p_in: 0.01,
            p_out: 0.1,
        };
        assert!(matches!(generate(&spec), Err(Error::InvalidParams(_))));
        assert!(generate(&GeneratorSpec::cycle(2)).is_err());
        let mut grid = GeneratorSpec::grid(3, 3);
        grid.n = 10;
        assert!(generate(&grid).is_err());
    }

    #[test]
    fn disconnected_after_retries() {
        let spec = GeneratorSpec {
            family: Family::Community {
                n_comm: 4,
                p_in: 0.5,
                p_out: 1e-9,
            },
            n: 80,
            seed: 1,
        };
        assert!(matches!(generate(&spec), Err(Error::Disconnected(10))));
    }

    #[test]
    fn spec_json() {
        let spec = GeneratorSpec::swiss_roll(1000, 4);
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v["family"], "swiss-roll");
        assert_eq!(v["N"], 1000);
        let back: GeneratorSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
    }
}
