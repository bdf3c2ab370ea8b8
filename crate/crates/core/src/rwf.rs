//! Range finding and embedding computation.
//!
//! `Q = ortho(p_chi(L) G)` with `G` an `N x (K + r)` Gaussian probe and
//! `p_chi` a Jackson-damped low-pass polynomial cut at `lambda_K`; then
//! `Phi = (p_h(L) Q)^T` with `p_h ~ h^(1/2)`, so that `Phi^T Phi ~ h(L)`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{apply_filter, indicator_filter, sqrt_kernel_filter, ChebyshevFilter, Damping, KernelFunction};
use crate::graph::Graph;
use crate::laplacian::{build_normalized_laplacian, LaplacianOperator};
use crate::random::{derive_seed, gaussian_matrix};
use crate::spectral::{estimate_lambda_k, EstimationConfig};

const PROBE_SALT: u64 = 0x9e << 32;
const ESTIMATION_STREAM: u64 = 0xe5;

/// Relative threshold on Householder pivots below which a column is dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Gaussian test matrix `G` with `K + r` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProbe {
    matrix: DMatrix<f64>,
    seed: u64,
    k: usize,
    r: usize,
}

impl RandomProbe {
    pub fn new(num_nodes: usize, k: usize, r: usize, seed: u64) -> Self {
        Self {
            matrix: gaussian_matrix(num_nodes, k + r, seed, PROBE_SALT),
            seed,
            k,
            r,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }
}

/// Orthonormal basis of the column span of `b` (Householder QR).
///
/// Fails with `RankDeficient(j)` when the `j`-th pivot drops below
/// `1e-12 ||B||_F`.
pub fn ortho(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = b.shape();
    if k > n {
        return Err(Error::InvalidParams(format!(
            "cannot orthonormalize {k} columns in dimension {n}"
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite entry in basis".into()));
    }
    if k == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let scale = b.norm();
    let qr = b.clone().qr();
    let r = qr.r();
    for j in 0..k {
        if !(r[(j, j)].abs() > RANK_TOLERANCE * scale) {
            return Err(Error::RankDeficient(j));
        }
    }
    Ok(qr.q())
}

/// Output of range finding.
#[derive(Debug, Clone)]
pub struct RangeBasis {
    pub q: DMatrix<f64>,
    /// Seed of the probe that produced `q` (differs from the request after a retry).
    pub probe_seed: u64,
    pub filter: ChebyshevFilter,
}

/// `Q = ortho(p_chi(L) G)`, with `p_chi` the degree-`m_chi` Jackson-damped
/// indicator of `[0, lambda_k]` and `G` the probe seeded with `seed`.
///
/// The column count is `min(K + r, N)`.
pub fn range_find(
    op: &LaplacianOperator,
    k: usize,
    r: usize,
    lambda_k: f64,
    m_chi: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    Ok(range_find_detailed(op, k, r, lambda_k, m_chi, seed)?.q)
}

pub fn range_find_detailed(
    op: &LaplacianOperator,
    k: usize,
    r: usize,
    lambda_k: f64,
    m_chi: usize,
    seed: u64,
) -> Result<RangeBasis> {
    if !(lambda_k > 0.0 && lambda_k <= 2.0) {
        return Err(Error::ParameterOutOfDomain(format!(
            "lambda_K = {lambda_k} outside (0, 2]"
        )));
    }
    let filter = indicator_filter(lambda_k, m_chi, Damping::Jackson)?;
    range_find_with_filter(op, &filter, k, r, seed)
}

/// Range finding with an arbitrary low-pass filter. A rank-deficient basis is
/// retried once with `seed + 1`.
pub fn range_find_with_filter(
    op: &LaplacianOperator,
    filter: &ChebyshevFilter,
    k: usize,
    r: usize,
    seed: u64,
) -> Result<RangeBasis> {
    let n = op.num_nodes();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let cols = (k + r).min(n);
    let attempt = |seed: u64| -> Result<DMatrix<f64>> {
        let probe = gaussian_matrix(n, cols, seed, PROBE_SALT);
        ortho(&apply_filter(op, filter, &probe)?)
    };
    let (q, probe_seed) = match attempt(seed) {
        Err(Error::RankDeficient(_)) => {
            let retry = seed.wrapping_add(1);
            (attempt(retry)?, retry)
        }
        other => (other?, seed),
    };
    Ok(RangeBasis {
        q,
        probe_seed,
        filter: filter.clone(),
    })
}

/// Wall-clock seconds spent in each pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub lambda_k: f64,
    pub chi_filter: f64,
    pub ortho: f64,
    pub h_filter: f64,
    pub total: f64,
}

/// Seeds and configuration needed to replay an embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub probe_seed: u64,
    pub estimation: Option<EstimationConfig>,
    pub lambda_k_supplied: bool,
    pub kernel: Option<KernelFunction>,
    pub filter_chi: Option<ChebyshevFilter>,
}

/// Node embeddings `Phi` (`(K + r) x N`); column `i` is the feature vector of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    phi: DMatrix<f64>,
    k: usize,
    r: usize,
    filter_h: ChebyshevFilter,
    lambda_k_estimate: f64,
    provenance: Provenance,
    timings: StageTimings,
}

/// `Phi = (p_h(L) Q)^T` with `p_h` the undamped degree-`m_h` approximation of `h^(1/2)`.
pub fn compute_embedding(
    op: &LaplacianOperator,
    q: &DMatrix<f64>,
    h: &KernelFunction,
    m_h: usize,
) -> Result<Embedding> {
    let filter = sqrt_kernel_filter(h, m_h)?;
    let mut emb = compute_embedding_with_filter(op, q, &filter)?;
    emb.provenance.kernel = Some(h.clone());
    Ok(emb)
}

pub fn compute_embedding_with_filter(
    op: &LaplacianOperator,
    q: &DMatrix<f64>,
    filter: &ChebyshevFilter,
) -> Result<Embedding> {
    let phi_t = apply_filter(op, filter, q)?;
    let cols = q.ncols();
    Ok(Embedding {
        phi: phi_t.transpose(),
        k: cols,
        r: 0,
        filter_h: filter.clone(),
        lambda_k_estimate: f64::NAN,
        provenance: Provenance {
            seed: 0,
            probe_seed: 0,
            estimation: None,
            lambda_k_supplied: false,
            kernel: None,
            filter_chi: None,
        },
        timings: StageTimings::default(),
    })
}

/// Parameters of the full approximation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub kernel: KernelFunction,
    pub k: usize,
    /// Oversampling; `None` selects `max(K / 10, 15)`.
    pub r: Option<usize>,
    pub m_chi: usize,
    pub m_h: usize,
    /// Bisection settings; `None` selects [`EstimationConfig::for_graph_size`].
    pub estimation: Option<EstimationConfig>,
    /// Known `lambda_K`; skips estimation when set.
    pub lambda_k: Option<f64>,
    pub seed: u64,
}

impl ApproxConfig {
    pub const DEFAULT_M_CHI: usize = 60;
    pub const DEFAULT_M_H: usize = 30;

    pub fn new(kernel: KernelFunction, k: usize, seed: u64) -> Self {
        Self {
            kernel,
            k,
            r: None,
            m_chi: Self::DEFAULT_M_CHI,
            m_h: Self::DEFAULT_M_H,
            estimation: None,
            lambda_k: None,
            seed,
        }
    }

    pub fn oversampling(&self) -> usize {
        self.r.unwrap_or_else(|| default_oversampling(self.k))
    }
}

/// `max(K / 10, 15)`.
pub fn default_oversampling(k: usize) -> usize {
    (k / 10).max(15)
}

/// Runs the whole pipeline on a graph.
pub fn approximate_kernel(graph: &Graph, cfg: &ApproxConfig) -> Result<Embedding> {
    let op = build_normalized_laplacian(graph.clone()).map_err(|e| e.in_stage("laplacian"))?;
    approximate_kernel_with_operator(&op, cfg)
}

/// Runs the pipeline on a prebuilt Laplacian.
///
/// When `K + r >= N` the basis is a full `N x N` orthonormal matrix and the
/// embedding reports `K = N`, `r = 0`.
pub fn approximate_kernel_with_operator(
    op: &LaplacianOperator,
    cfg: &ApproxConfig,
) -> Result<Embedding> {
    Ok(approximate_kernel_with_basis(op, cfg)?.0)
}

/// Like [`approximate_kernel_with_operator`], also returning the basis `Q`.
pub fn approximate_kernel_with_basis(
    op: &LaplacianOperator,
    cfg: &ApproxConfig,
) -> Result<(Embedding, DMatrix<f64>)> {
    let start = Instant::now();
    let n = op.num_nodes();
    cfg.kernel.validate().map_err(|e| e.in_stage("config"))?;
    if cfg.k < 1 || cfg.k > n {
        return Err(Error::KOutOfRange { k: cfg.k, n }.in_stage("config"));
    }
    let mut r = cfg.oversampling();
    let mut k = cfg.k;
    if k + r >= n {
        k = n;
        r = 0;
    }

    let mut timings = StageTimings::default();
    let mut estimation = None;
    let t = Instant::now();
    let lambda_k = match (k == n, cfg.lambda_k) {
        (true, _) => 2.0,
        (false, Some(l)) => l,
        (false, None) => {
            let est = cfg.estimation.clone().unwrap_or_else(|| {
                EstimationConfig::for_graph_size(n, derive_seed(cfg.seed, &[ESTIMATION_STREAM]))
            });
            let l = estimate_lambda_k(op, k, &est).map_err(|e| e.in_stage("lambda_k"))?;
            estimation = Some(est);
            l
        }
    };
    timings.lambda_k = t.elapsed().as_secs_f64();

    let filter_chi = indicator_filter(lambda_k, cfg.m_chi, Damping::Jackson)
        .map_err(|e| e.in_stage("chi_filter"))?;
    let cols = k + r;
    let mut probe_seed = cfg.seed;
    let mut basis = None;
    for attempt in 0..2 {
        let t = Instant::now();
        let probe = gaussian_matrix(n, cols, probe_seed, PROBE_SALT);
        let filtered = apply_filter(op, &filter_chi, &probe).map_err(|e| e.in_stage("chi_filter"))?;
        timings.chi_filter += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let result = ortho(&filtered);
        timings.ortho += t.elapsed().as_secs_f64();
        match result {
            Ok(q) => {
                basis = Some(q);
                break;
            }
            Err(Error::RankDeficient(_)) if attempt == 0 => {
                probe_seed = cfg.seed.wrapping_add(1);
            }
            Err(e) => return Err(e.in_stage("ortho")),
        }
    }
    let q = basis.expect("second attempt either succeeds or returns");

    let t = Instant::now();
    let filter_h = sqrt_kernel_filter(&cfg.kernel, cfg.m_h).map_err(|e| e.in_stage("h_filter"))?;
    let phi_t = apply_filter(op, &filter_h, &q).map_err(|e| e.in_stage("h_filter"))?;
    timings.h_filter = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    let emb = Embedding {
        phi: phi_t.transpose(),
        k,
        r,
        filter_h,
        lambda_k_estimate: lambda_k,
        provenance: Provenance {
            seed: cfg.seed,
            probe_seed,
            estimation,
            lambda_k_supplied: cfg.lambda_k.is_some(),
            kernel: Some(cfg.kernel.clone()),
            filter_chi: Some(filter_chi),
        },
        timings,
    };
    Ok((emb, q))
}

/// `Gamma~ x = Phi^T (Phi x)` without forming `Gamma~`.
pub fn kernel_matvec(emb: &Embedding, x: &[f64]) -> Result<Vec<f64>> {
    let n = emb.num_nodes();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let x = DVector::from_column_slice(x);
    let z = &emb.phi * x;
    Ok(emb.phi.tr_mul(&z).as_slice().to_vec())
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingHeader {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    r: usize,
    seeds: Seeds,
    filter_h: ChebyshevFilter,
    filter_chi: Option<ChebyshevFilter>,
    kernel: Option<KernelFunction>,
    estimation: Option<EstimationConfig>,
    lambda_k_supplied: bool,
    lambda_k_estimate: Option<f64>,
    stage_timings: StageTimings,
}

#[derive(Debug, Serialize, Deserialize)]
struct Seeds {
    seed: u64,
    probe: u64,
    estimation: Option<u64>,
}

impl Embedding {
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Feature vector of node `i`.
    pub fn node(&self, i: usize) -> DVector<f64> {
        self.phi.column(i).into_owned()
    }

    pub fn num_nodes(&self) -> usize {
        self.phi.ncols()
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn filter_h(&self) -> &ChebyshevFilter {
        &self.filter_h
    }

    pub fn lambda_k_estimate(&self) -> f64 {
        self.lambda_k_estimate
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn timings(&self) -> &StageTimings {
        &self.timings
    }

    /// Dense `Phi^T Phi`. `O(N^2 (K + r))`; meant for checks on small graphs.
    pub fn gram(&self) -> DMatrix<f64> {
        self.phi.tr_mul(&self.phi)
    }

    /// Writes a JSON header line followed by the raw little-endian `f64`
    /// matrix in row-major order (`K + r` rows, `N` columns).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = EmbeddingHeader {
            n: self.num_nodes(),
            k: self.k,
            r: self.r,
            seeds: Seeds {
                seed: self.provenance.seed,
                probe: self.provenance.probe_seed,
                estimation: self.provenance.estimation.as_ref().map(|e| e.seed),
            },
            filter_h: self.filter_h.clone(),
            filter_chi: self.provenance.filter_chi.clone(),
            kernel: self.provenance.kernel.clone(),
            estimation: self.provenance.estimation.clone(),
            lambda_k_supplied: self.provenance.lambda_k_supplied,
            lambda_k_estimate: self.lambda_k_estimate.is_finite().then_some(self.lambda_k_estimate),
            stage_timings: self.timings,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(8 * self.phi.len());
        for i in 0..self.phi.nrows() {
            for j in 0..self.phi.ncols() {
                buf.extend_from_slice(&self.phi[(i, j)].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut line = Vec::new();
        reader.read_until(b'\n', &mut line)?;
        let header: EmbeddingHeader = serde_json::from_slice(&line)?;
        let rows = header.k + header.r;
        let mut raw = Vec::new();
        reader.read_to_end(&mut raw)?;
        if raw.len() != 8 * rows * header.n {
            return Err(Error::DimensionMismatch {
                expected: 8 * rows * header.n,
                got: raw.len(),
            });
        }
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")));
        let phi = DMatrix::from_row_iterator(rows, header.n, values);
        Ok(Self {
            phi,
            k: header.k,
            r: header.r,
            filter_h: header.filter_h,
            lambda_k_estimate: header.lambda_k_estimate.unwrap_or(f64::NAN),
            provenance: Provenance {
                seed: header.seeds.seed,
                probe_seed: header.seeds.probe,
                estimation: header.estimation,
                lambda_k_supplied: header.lambda_k_supplied,
                kernel: header.kernel,
                filter_chi: header.filter_chi,
            },
            timings: header.stage_timings,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}
