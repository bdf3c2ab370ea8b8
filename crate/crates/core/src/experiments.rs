//! Experiment sweeps: error vs `sigma`, error vs `K`, and stage timings vs `N`
//! and `K`, with per-trial records, min/mean/max aggregates and JSON / CSV
//! output.
//!
//! Each trial seeds its pipeline from `(base seed, setting index, trial index)`,
//! so a report can be replayed from its configuration alone and trials can run
//! in any order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filters::{apply_filter, chebyshev_coefficients, ChebyshevFilter, Damping, KernelFunction};
use crate::generators::{generate, GeneratorSpec};
use crate::graph::Graph;
use crate::laplacian::{build_normalized_laplacian, LaplacianOperator};
use crate::oracle::{
    best_rank_k_error, dense_eigendecomposition_capped, diagnostics, exact_norm, relative_spectral_error,
    EigenSystem, DEFAULT_DENSE_CAP,
};
use crate::random::derive_seed;
use crate::rwf::{approximate_kernel_with_basis, kernel_matvec, ApproxConfig, StageTimings};

/// Degree of the Chebyshev reference for `h(L)` on graphs above the dense cap.
pub const REFERENCE_DEGREE: usize = 300;
pub const POWER_ITERATIONS: usize = 500;
pub const POWER_TOLERANCE: f64 = 1e-9;

/// Kernel family; the scale `sigma` is supplied per setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    Dreg { d: u32 },
    Rw2,
    Diffusion,
    Invcos,
}

impl KernelKind {
    pub fn with_sigma(&self, sigma: f64) -> Result<KernelFunction> {
        match *self {
            KernelKind::Dreg { d } => KernelFunction::regularized_laplacian(sigma, d),
            KernelKind::Rw2 => KernelFunction::two_step_random_walk(sigma),
            KernelKind::Diffusion => KernelFunction::diffusion(sigma),
            KernelKind::Invcos => KernelFunction::inverse_cosine(sigma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Dreg { .. } => "dreg",
            KernelKind::Rw2 => "rw2",
            KernelKind::Diffusion => "diffusion",
            KernelKind::Invcos => "invcos",
        }
    }
}

/// Where `lambda_K` comes from in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSource {
    /// Bisection on polynomial eigenvalue counts.
    #[default]
    Estimated,
    /// The dense oracle's `lambda_K`; needs `N <= dense_cap`.
    Exact,
}

/// Parameters shared by all sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub kernel: KernelKind,
    /// Kernel scale for sweeps that do not vary it.
    pub sigma: f64,
    /// Oversampling; `None` selects `max(K / 10, 15)`.
    pub r: Option<usize>,
    pub m_chi: usize,
    pub m_h: usize,
    pub trials: usize,
    pub seed: u64,
    pub lambda_k: LambdaSource,
    /// Dense error evaluation is used when `N <= dense_cap`.
    pub dense_cap: usize,
}

impl BenchParams {
    pub fn new(kernel: KernelKind, sigma: f64, seed: u64) -> Self {
        Self {
            kernel,
            sigma,
            r: None,
            m_chi: ApproxConfig::DEFAULT_M_CHI,
            m_h: ApproxConfig::DEFAULT_M_H,
            trials: 5,
            seed,
            lambda_k: LambdaSource::Estimated,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sweep", rename_all = "kebab-case")]
pub enum Sweep {
    Sigma { k: usize, sigmas: Vec<f64> },
    K { ks: Vec<usize> },
    /// Graphs are generated from `template` with `N` replaced.
    Timing {
        template: GeneratorSpec,
        ns: Vec<usize>,
        ks: Vec<usize>,
    },
}

/// Identifies the input graph of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInfo {
    /// SHA-256 of the graph's text serialization.
    pub sha256: String,
    #[serde(rename = "N")]
    pub num_nodes: usize,
    #[serde(rename = "E")]
    pub num_edges: usize,
}

impl GraphInfo {
    pub fn of(graph: &Graph) -> Self {
        let digest = Sha256::digest(graph.to_text().as_bytes());
        Self {
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            num_nodes: graph.num_nodes(),
            num_edges: graph.num_edges(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: BenchParams,
    pub sweep: Sweep,
    /// Input graph; `None` for timing sweeps, which generate their own.
    pub graph: Option<GraphInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPath {
    /// Dense eigendecomposition.
    Dense,
    /// Power iteration against a high-degree Chebyshev reference.
    Power,
    /// Errors not evaluated.
    None,
}

/// One pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub setting: usize,
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub r: usize,
    /// Embedding dimension (`K + r`, or `N` when that exceeds `N`).
    pub rank: usize,
    pub lambda_k: f64,
    /// `||Gamma - Phi^T Phi|| / ||Gamma||`
    pub rel_err: Option<f64>,
    pub e_r: Option<f64>,
    pub e_p: Option<f64>,
    pub bound_e_p: Option<f64>,
    pub bound_e_r: Option<f64>,
    pub eps_chi: Option<f64>,
    pub eps_h: Option<f64>,
    pub assumption1_holds: Option<bool>,
    /// `h(lambda_{K+1}) / ||Gamma||`
    pub best_rank_k_err: Option<f64>,
    /// `h(lambda_{K+r+1}) / ||Gamma||`
    pub best_rank_kr_err: Option<f64>,
    pub error_path: ErrorPath,
    /// False when power iteration hit its iteration limit.
    pub converged: bool,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    /// `None` for an empty sample.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return None;
        }
        Some(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub lambda_k: Stats,
    pub chi_filter: Stats,
    pub ortho: Stats,
    pub h_filter: Stats,
    pub total: Stats,
}

/// Aggregate over the trials of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub r: usize,
    pub trials: usize,
    pub rel_err: Option<Stats>,
    pub e_r: Option<Stats>,
    pub e_p: Option<Stats>,
    pub bound_e_p: Option<Stats>,
    pub bound_e_r: Option<Stats>,
    pub best_rank_k_err: Option<f64>,
    pub best_rank_kr_err: Option<f64>,
    pub assumption1_failures: usize,
    pub timings: TimingStats,
}

impl SettingSummary {
    fn from_trials(records: &[&TrialRecord]) -> Self {
        let first = records[0];
        let stat = |f: fn(&TrialRecord) -> Option<f64>| Stats::of(records.iter().filter_map(|r| f(r)));
        let time = |f: fn(&StageTimings) -> f64| {
            Stats::of(records.iter().map(|r| f(&r.timings))).expect("non-empty")
        };
        Self {
            setting: first.setting,
            n: first.n,
            sigma: first.sigma,
            k: first.k,
            r: first.r,
            trials: records.len(),
            rel_err: stat(|r| r.rel_err),
            e_r: stat(|r| r.e_r),
            e_p: stat(|r| r.e_p),
            bound_e_p: stat(|r| r.bound_e_p),
            bound_e_r: stat(|r| r.bound_e_r),
            best_rank_k_err: first.best_rank_k_err,
            best_rank_kr_err: first.best_rank_kr_err,
            assumption1_failures: records
                .iter()
                .filter(|r| r.assumption1_holds == Some(false))
                .count(),
            timings: TimingStats {
                lambda_k: time(|t| t.lambda_k),
                chi_filter: time(|t| t.chi_filter),
                ortho: time(|t| t.ortho),
                h_filter: time(|t| t.h_filter),
                total: time(|t| t.total),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<SettingSummary>,
}

/// Flat CSV row, one per trial.
#[derive(Debug, Serialize, Deserialize)]
pub struct CsvRow {
    pub setting: usize,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub r: usize,
    pub trial: usize,
    pub rel_err: Option<f64>,
    pub e_r: Option<f64>,
    pub e_p: Option<f64>,
    pub bound_e_p: Option<f64>,
    pub bound_e_r: Option<f64>,
    pub best_rank_k_err: Option<f64>,
    pub best_rank_kr_err: Option<f64>,
    pub t_lambda: f64,
    pub t_chi_filter: f64,
    pub t_ortho: f64,
    pub t_h_filter: f64,
    pub t_total: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub rank: usize,
    pub seed: u64,
    pub kernel: String,
    pub lambda_k: f64,
    pub eps_chi: Option<f64>,
    pub eps_h: Option<f64>,
    pub assumption1_holds: Option<bool>,
    pub error_path: ErrorPath,
    pub converged: bool,
}

/// Column order of `report.csv`.
pub const CSV_COLUMNS: [&str; 27] = [
    "setting",
    "sigma",
    "K",
    "r",
    "trial",
    "rel_err",
    "e_r",
    "e_p",
    "bound_e_p",
    "bound_e_r",
    "best_rank_k_err",
    "best_rank_kr_err",
    "t_lambda",
    "t_chi_filter",
    "t_ortho",
    "t_h_filter",
    "t_total",
    "N",
    "rank",
    "seed",
    "kernel",
    "lambda_k",
    "eps_chi",
    "eps_h",
    "assumption1_holds",
    "error_path",
    "converged",
];

impl ExperimentReport {
    /// Builds the report and its per-setting aggregates from trial records.
    pub fn from_records(config: ExperimentConfig, mut records: Vec<TrialRecord>) -> Self {
        records.sort_by_key(|r| (r.setting, r.trial));
        let mut summaries = Vec::new();
        let mut start = 0;
        while start < records.len() {
            let setting = records[start].setting;
            let end = records[start..]
                .iter()
                .position(|r| r.setting != setting)
                .map_or(records.len(), |p| start + p);
            let group: Vec<&TrialRecord> = records[start..end].iter().collect();
            summaries.push(SettingSummary::from_trials(&group));
            start = end;
        }
        Self {
            config,
            records,
            summaries,
        }
    }

    pub fn summary(&self, setting: usize) -> Option<&SettingSummary> {
        self.summaries.iter().find(|s| s.setting == setting)
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let kernel = self.config.params.kernel.name().to_string();
        self.records
            .iter()
            .map(|r| CsvRow {
                setting: r.setting,
                sigma: r.sigma,
                k: r.k,
                r: r.r,
                trial: r.trial,
                rel_err: r.rel_err,
                e_r: r.e_r,
                e_p: r.e_p,
                bound_e_p: r.bound_e_p,
                bound_e_r: r.bound_e_r,
                best_rank_k_err: r.best_rank_k_err,
                best_rank_kr_err: r.best_rank_kr_err,
                t_lambda: r.timings.lambda_k,
                t_chi_filter: r.timings.chi_filter,
                t_ortho: r.timings.ortho,
                t_h_filter: r.timings.h_filter,
                t_total: r.timings.total,
                n: r.n,
                rank: r.rank,
                seed: r.seed,
                kernel: kernel.clone(),
                lambda_k: r.lambda_k,
                eps_chi: r.eps_chi,
                eps_h: r.eps_h,
                assumption1_holds: r.assumption1_holds,
                error_path: r.error_path,
                converged: r.converged,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        if self.records.is_empty() {
            writer.write_record(CSV_COLUMNS)?;
        }
        for row in self.csv_rows() {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Writes `report.json` and `report.csv` into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut json = BufWriter::new(File::create(dir.join("report.json"))?);
        self.write_json(&mut json)?;
        json.flush()?;
        self.write_csv(BufWriter::new(File::create(dir.join("report.csv"))?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }
}

/// Seed of trial `trial` in setting `setting`.
pub fn trial_seed(base: u64, setting: usize, trial: usize) -> u64 {
    derive_seed(base, &[setting as u64, trial as u64])
}

enum Evaluator {
    Dense(EigenSystem),
    Power,
    Skip,
}

struct Context<'a> {
    op: &'a LaplacianOperator,
    eval: &'a Evaluator,
    params: &'a BenchParams,
}

impl Context<'_> {
    fn run(&self, h: &KernelFunction, sigma: f64, k: usize, setting: usize, trial: usize) -> Result<TrialRecord> {
        let n = self.op.num_nodes();
        let seed = trial_seed(self.params.seed, setting, trial);
        let mut cfg = ApproxConfig::new(h.clone(), k, seed);
        cfg.r = self.params.r;
        cfg.m_chi = self.params.m_chi;
        cfg.m_h = self.params.m_h;
        let r = cfg.oversampling();
        if self.params.lambda_k == LambdaSource::Exact && k < n {
            match self.eval {
                Evaluator::Dense(es) => cfg.lambda_k = Some(es.lambda(k)),
                _ => {
                    return Err(Error::InvalidParams(format!(
                        "exact lambda_K needs N = {n} <= dense cap {}",
                        self.params.dense_cap
                    )))
                }
            }
        }
        let (emb, q) = approximate_kernel_with_basis(self.op, &cfg)?;
        let mut record = TrialRecord {
            setting,
            trial,
            seed,
            n,
            sigma,
            k,
            r,
            rank: emb.dim(),
            lambda_k: emb.lambda_k_estimate(),
            rel_err: None,
            e_r: None,
            e_p: None,
            bound_e_p: None,
            bound_e_r: None,
            eps_chi: None,
            eps_h: None,
            assumption1_holds: None,
            best_rank_k_err: None,
            best_rank_kr_err: None,
            error_path: ErrorPath::None,
            converged: true,
            timings: *emb.timings(),
        };
        match self.eval {
            Evaluator::Dense(es) => {
                let p_chi = emb.provenance().filter_chi.as_ref().expect("pipeline records its filter");
                let d = diagnostics(es, &q, p_chi, emb.filter_h(), h, emb.k(), emb.r())?;
                let norm = exact_norm(es, h);
                let finite = |v: f64| v.is_finite().then_some(v);
                record.rel_err = Some(d.rel_spectral_error);
                record.e_r = Some(d.e_r);
                record.e_p = Some(d.e_p);
                record.bound_e_p = Some(d.bound_e_p);
                record.bound_e_r = finite(d.bound_e_r);
                record.eps_chi = Some(d.eps_chi);
                record.eps_h = Some(d.eps_h);
                record.assumption1_holds = Some(d.assumption1_holds);
                record.best_rank_k_err = Some(best_rank_k_error(es, h, k) / norm);
                record.best_rank_kr_err = Some(best_rank_k_error(es, h, k + r) / norm);
                record.error_path = ErrorPath::Dense;
            }
            Evaluator::Power => {
                let reference = chebyshev_coefficients(|l| h.eval(l), REFERENCE_DEGREE, Damping::None, "h")?;
                let est = relative_spectral_error(
                    |x| apply_vector(self.op, &reference, x),
                    |x| kernel_matvec(&emb, x).expect("length checked by caller"),
                    n,
                    POWER_ITERATIONS,
                    POWER_TOLERANCE,
                    seed,
                );
                record.rel_err = Some(est.value);
                record.converged = est.converged;
                record.error_path = ErrorPath::Power;
            }
            Evaluator::Skip => {}
        }
        Ok(record)
    }
}

fn apply_vector(op: &LaplacianOperator, filter: &ChebyshevFilter, x: &[f64]) -> Vec<f64> {
    let x = DMatrix::from_column_slice(x.len(), 1, x);
    apply_filter(op, filter, &x).expect("length matches operator").as_slice().to_vec()
}

fn evaluator(op: &LaplacianOperator, params: &BenchParams) -> Result<Evaluator> {
    if op.num_nodes() <= params.dense_cap {
        Ok(Evaluator::Dense(dense_eigendecomposition_capped(op, params.dense_cap)?))
    } else {
        Ok(Evaluator::Power)
    }
}

/// Runs every `(setting, trial)` pair in parallel.
fn run_settings(
    ctx: &Context<'_>,
    settings: &[(KernelFunction, f64, usize)],
) -> Result<Vec<TrialRecord>> {
    let jobs: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|s| (0..ctx.params.trials).map(move |t| (s, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(s, t)| {
            let (h, sigma, k) = &settings[s];
            ctx.run(h, *sigma, *k, s, t)
        })
        .collect()
}

/// Error vs kernel scale at fixed `K`.
pub fn sweep_sigma(graph: &Graph, params: &BenchParams, k: usize, sigmas: &[f64]) -> Result<ExperimentReport> {
    let config = ExperimentConfig {
        params: params.clone(),
        sweep: Sweep::Sigma {
            k,
            sigmas: sigmas.to_vec(),
        },
        graph: Some(GraphInfo::of(graph)),
    };
    run_on_graph(config, graph)
}

/// Error vs target rank at fixed kernel scale, with best rank-`K` and
/// rank-`(K + r)` oracle errors.
pub fn sweep_k(graph: &Graph, params: &BenchParams, ks: &[usize]) -> Result<ExperimentReport> {
    let config = ExperimentConfig {
        params: params.clone(),
        sweep: Sweep::K { ks: ks.to_vec() },
        graph: Some(GraphInfo::of(graph)),
    };
    run_on_graph(config, graph)
}

fn run_on_graph(config: ExperimentConfig, graph: &Graph) -> Result<ExperimentReport> {
    let params = &config.params;
    params.validate()?;
    let settings: Vec<(KernelFunction, f64, usize)> = match &config.sweep {
        Sweep::Sigma { k, sigmas } => sigmas
            .iter()
            .map(|&s| Ok((params.kernel.with_sigma(s)?, s, *k)))
            .collect::<Result<_>>()?,
        Sweep::K { ks } => {
            let h = params.kernel.with_sigma(params.sigma)?;
            ks.iter().map(|&k| (h.clone(), params.sigma, k)).collect()
        }
        Sweep::Timing { .. } => {
            return Err(Error::InvalidParams("timing sweeps generate their own graphs".into()))
        }
    };
    if settings.is_empty() {
        return Err(Error::EmptySweep);
    }
    let n = graph.num_nodes();
    if let Some(&(_, _, k)) = settings.iter().find(|s| s.2 < 1 || s.2 > n) {
        return Err(Error::KOutOfRange { k, n });
    }
    let op = build_normalized_laplacian(graph.clone())?;
    let eval = evaluator(&op, params)?;
    let ctx = Context {
        op: &op,
        eval: &eval,
        params,
    };
    let records = run_settings(&ctx, &settings)?;
    Ok(ExperimentReport::from_records(config, records))
}

/// Stage wall-clock for every `(N, K)` pair on graphs generated from
/// `template`. Trials run sequentially after one discarded warm-up run per
/// setting; errors are not evaluated.
pub fn timing(params: &BenchParams, template: &GeneratorSpec, ns: &[usize], ks: &[usize]) -> Result<ExperimentReport> {
    params.validate()?;
    if ns.is_empty() || ks.is_empty() {
        return Err(Error::EmptySweep);
    }
    let config = ExperimentConfig {
        params: params.clone(),
        sweep: Sweep::Timing {
            template: template.clone(),
            ns: ns.to_vec(),
            ks: ks.to_vec(),
        },
        graph: None,
    };
    let h = params.kernel.with_sigma(params.sigma)?;
    let mut records = Vec::new();
    let mut setting = 0;
    for &n in ns {
        let spec = GeneratorSpec {
            n,
            ..template.clone()
        };
        let graph = generate(&spec)?;
        let op = build_normalized_laplacian(graph)?;
        let ctx = Context {
            op: &op,
            eval: &Evaluator::Skip,
            params,
        };
        for &k in ks {
            ctx.run(&h, params.sigma, k, setting, 0)?;
            for trial in 0..params.trials {
                records.push(ctx.run(&h, params.sigma, k, setting, trial)?);
            }
            setting += 1;
        }
    }
    Ok(ExperimentReport::from_records(config, records))
}

/// Re-runs a configuration. `graph` must match the recorded hash for sweeps
/// over a fixed graph and is ignored for timing sweeps.
pub fn replay(config: &ExperimentConfig, graph: Option<&Graph>) -> Result<ExperimentReport> {
    match &config.sweep {
        Sweep::Timing { template, ns, ks } => timing(&config.params, template, ns, ks),
        _ => {
            let graph = graph.ok_or_else(|| Error::InvalidParams("replay needs the input graph".into()))?;
            let info = GraphInfo::of(graph);
            if config.graph.as_ref() != Some(&info) {
                return Err(Error::InvalidParams(format!(
                    "graph hash {} does not match the recorded configuration",
                    info.sha256
                )));
            }
            run_on_graph(config.clone(), graph)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(trials: usize) -> BenchParams {
        let mut p = BenchParams::new(KernelKind::Diffusion, 3.0, 7);
        p.trials = trials;
        p.r = Some(4);
        p.m_chi = 40;
        p.m_h = 20;
        p
    }

    #[test]
    fn single_setting_single_record() {
        let g = generate(&GeneratorSpec::cycle(40)).unwrap();
        let report = sweep_sigma(&g, &params(1), 6, &[2.0]).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.summaries.len(), 1);
        let rec = &report.records[0];
        assert_eq!(rec.error_path, ErrorPath::Dense);
        assert!(rec.rel_err.unwrap() < 1.0);
        let s = &report.summaries[0];
        assert_eq!(s.rel_err.unwrap().mean, rec.rel_err.unwrap());
    }

    #[test]
    fn aggregates_cover_exactly_the_trials() {
        let g = generate(&GeneratorSpec::cycle(40)).unwrap();
        let report = sweep_k(&g, &params(3), &[4, 8]).unwrap();
        assert_eq!(report.records.len(), 6);
        for s in &report.summaries {
            let errs: Vec<f64> = report
                .records
                .iter()
                .filter(|r| r.setting == s.setting)
                .map(|r| r.rel_err.unwrap())
                .collect();
            assert_eq!(errs.len(), 3);
            let stats = s.rel_err.unwrap();
            assert_eq!(stats.min, errs.iter().copied().fold(f64::INFINITY, f64::min));
            assert_eq!(stats.max, errs.iter().copied().fold(0.0, f64::max));
            assert!((stats.mean - errs.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_sweeps() {
        let g = generate(&GeneratorSpec::cycle(20)).unwrap();
        assert!(matches!(sweep_k(&g, &params(1), &[]), Err(Error::EmptySweep)));
        assert!(matches!(sweep_sigma(&g, &params(1), 4, &[]), Err(Error::EmptySweep)));
        assert!(matches!(sweep_k(&g, &params(1), &[21]), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn power_path_agrees_with_dense() {
        let g = generate(&GeneratorSpec::cycle(60)).unwrap();
        let dense = sweep_k(&g, &params(1), &[10]).unwrap();
        let mut p = params(1);
        p.dense_cap = 10;
        let power = sweep_k(&g, &p, &[10]).unwrap();
        let (a, b) = (&dense.records[0], &power.records[0]);
        assert_eq!(b.error_path, ErrorPath::Power);
        assert!(b.converged);
        assert!((a.rel_err.unwrap() - b.rel_err.unwrap()).abs() < 1e-3 * a.rel_err.unwrap());
    }

    #[test]
    fn csv_schema() {
        let g = generate(&GeneratorSpec::cycle(30)).unwrap();
        let report = sweep_sigma(&g, &params(2), 5, &[1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, CSV_COLUMNS.join(","));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn replay_reproduces_errors() {
        let g = generate(&GeneratorSpec::cycle(50)).unwrap();
        let report = sweep_k(&g, &params(2), &[5, 12]).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        let again = replay(&back.config, Some(&g)).unwrap();
        for (a, b) in report.records.iter().zip(&again.records) {
            assert_eq!(a.seed, b.seed);
            assert!((a.rel_err.unwrap() - b.rel_err.unwrap()).abs() <= 1e-12);
            assert!((a.e_r.unwrap() - b.e_r.unwrap()).abs() <= 1e-12);
        }
        let other = generate(&GeneratorSpec::path(50)).unwrap();
        assert!(replay(&back.config, Some(&other)).is_err());
    }

    #[test]
    fn timing_records_stages() {
        let p = params(2);
        let report = timing(&p, &GeneratorSpec::cycle(10), &[100, 200], &[5, 10]).unwrap();
        assert_eq!(report.summaries.len(), 4);
        assert_eq!(report.records.len(), 8);
        for r in &report.records {
            assert_eq!(r.error_path, ErrorPath::None);
            assert!(r.timings.total > 0.0 && r.timings.total >= r.timings.chi_filter);
        }
    }
}
