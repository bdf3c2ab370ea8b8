//! `rwf`: generate graphs, compute kernel embeddings and run the error and
//! timing experiments.
//!
//! Exit status is 0 on success, 2 on invalid input and 3 on numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rwf_core::experiments::{
    sweep_k, sweep_sigma, timing, BenchParams, ExperimentReport, KernelKind, LambdaSource,
};
use rwf_core::generators::{generate, Family, GeneratorSpec};
use rwf_core::oracle::{mc_gaussian_pseudoinverse, DEFAULT_DENSE_CAP};
use rwf_core::rwf::{approximate_kernel, default_oversampling, ApproxConfig};
use rwf_core::{EstimationConfig, Graph};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rwf", version, about = "Randomized low-rank approximation of graph kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph in the text edge-list format.
    Gen(GenArgs),
    /// Compute node embeddings for one kernel.
    Approx(ApproxArgs),
    /// Error as a function of the kernel scale sigma.
    SweepSigma(SweepSigmaArgs),
    /// Error as a function of the target rank K.
    SweepK(SweepKArgs),
    /// Stage timings as functions of N and K.
    Timing(TimingArgs),
    /// Compare measured errors with the deterministic and expected error bounds.
    VerifyBounds(VerifyArgs),
    /// Monte-Carlo moments of the pseudo-inverse of a K x (K + r) Gaussian matrix.
    McLemma(McArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    SwissRoll,
    Community,
    Cycle,
    Path,
    Grid,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long = "n")]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    k_nn: usize,
    /// Gaussian width; defaults to the mean k-NN distance.
    #[arg(long)]
    width: Option<f64>,
    #[arg(long, default_value_t = 8)]
    n_comm: usize,
    #[arg(long, default_value_t = 0.2)]
    p_in: f64,
    #[arg(long, default_value_t = 0.002)]
    p_out: f64,
    /// Grid rows; columns are N / rows.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

impl GenArgs {
    fn spec(&self) -> GeneratorSpec {
        let family = match self.family {
            FamilyArg::SwissRoll => Family::SwissRoll {
                k_nn: self.k_nn,
                width: self.width,
            },
            FamilyArg::Community => Family::Community {
                n_comm: self.n_comm,
                p_in: self.p_in,
                p_out: self.p_out,
            },
            FamilyArg::Cycle => Family::Cycle,
            FamilyArg::Path => Family::Path,
            FamilyArg::Grid => {
                let rows = self.rows.unwrap_or_else(|| (self.n as f64).sqrt().round() as usize).max(1);
                Family::Grid {
                    rows,
                    cols: self.n / rows,
                }
            }
        };
        GeneratorSpec {
            family,
            n: self.n,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Dreg,
    Rw2,
    Diffusion,
    Invcos,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "diffusion")]
    kernel: KernelArg,
    /// Exponent of the regularized Laplacian kernel.
    #[arg(long, default_value_t = 1)]
    d: u32,
}

impl KernelArgs {
    fn kind(&self) -> KernelKind {
        match self.kernel {
            KernelArg::Dreg => KernelKind::Dreg { d: self.d },
            KernelArg::Rw2 => KernelKind::Rw2,
            KernelArg::Diffusion => KernelKind::Diffusion,
            KernelArg::Invcos => KernelKind::Invcos,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Oversampling; defaults to max(K / 10, 15).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = ApproxConfig::DEFAULT_M_CHI)]
    m_chi: usize,
    #[arg(long, default_value_t = ApproxConfig::DEFAULT_M_H)]
    m_h: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Use the dense oracle's lambda_K instead of estimating it.
    #[arg(long)]
    exact_lambda: bool,
    /// Largest N evaluated densely; larger graphs use power iteration.
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
}

impl BenchArgs {
    fn params(&self, sigma: f64) -> BenchParams {
        let mut p = BenchParams::new(self.kernel.kind(), sigma, self.pipeline.seed);
        p.r = self.pipeline.r;
        p.m_chi = self.pipeline.m_chi;
        p.m_h = self.pipeline.m_h;
        p.trials = self.trials;
        p.dense_cap = self.dense_cap;
        if self.exact_lambda {
            p.lambda_k = LambdaSource::Exact;
        }
        p
    }
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Bisection tolerance for lambda_K.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Skip estimation and use this lambda_K.
    #[arg(long)]
    lambda_k: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepSigmaArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    k: usize,
    /// Comma-separated kernel scales.
    #[arg(long, value_delimiter = ',', required = true)]
    sigmas: Vec<f64>,
    #[command(flatten)]
    bench: BenchArgs,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepKArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    sigma: f64,
    /// Comma-separated target ranks.
    #[arg(long, value_delimiter = ',', required = true)]
    ks: Vec<usize>,
    #[command(flatten)]
    bench: BenchArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TimingArgs {
    /// Graph family, generated with its default parameters.
    #[arg(long, value_enum, default_value = "swiss-roll")]
    family: FamilyArg,
    #[arg(long, value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
    #[command(flatten)]
    bench: BenchArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    bench: BenchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

type CliResult = Result<(), rwf_core::Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Approx(a) => cmd_approx(a),
        Command::SweepSigma(a) => cmd_sweep_sigma(a),
        Command::SweepK(a) => cmd_sweep_k(a),
        Command::Timing(a) => cmd_timing(a),
        Command::VerifyBounds(a) => cmd_verify(a),
        Command::McLemma(a) => cmd_mc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let spec = a.spec();
    let graph = generate(&spec)?;
    graph.save(&a.out)?;
    print_json(&json!({
        "spec": spec,
        "N": graph.num_nodes(),
        "E": graph.num_edges(),
        "out": a.out,
    }));
    Ok(())
}

fn cmd_approx(a: ApproxArgs) -> CliResult {
    let graph = Graph::load(&a.graph)?;
    let kernel = a.kernel.kind().with_sigma(a.sigma)?;
    let mut cfg = ApproxConfig::new(kernel, a.k, a.pipeline.seed);
    cfg.r = a.pipeline.r;
    cfg.m_chi = a.pipeline.m_chi;
    cfg.m_h = a.pipeline.m_h;
    cfg.lambda_k = a.lambda_k;
    if let Some(tol) = a.tolerance {
        let est = EstimationConfig::for_graph_size(graph.num_nodes(), a.pipeline.seed).with_tolerance(tol);
        cfg.estimation = Some(est);
    }
    let emb = approximate_kernel(&graph, &cfg)?;
    emb.save(&a.out)?;
    print_json(&json!({
        "N": emb.num_nodes(),
        "K": emb.k(),
        "r": emb.r(),
        "lambda_k_estimate": emb.lambda_k_estimate(),
        "stage_timings": emb.timings(),
        "out": a.out,
    }));
    Ok(())
}

fn save_report(report: &ExperimentReport, out: &Path) -> CliResult {
    report.save(out)?;
    let rows: Vec<_> = report
        .summaries
        .iter()
        .map(|s| {
            json!({
                "setting": s.setting,
                "N": s.n,
                "sigma": s.sigma,
                "K": s.k,
                "r": s.r,
                "rel_err": s.rel_err,
                "best_rank_k_err": s.best_rank_k_err,
                "t_total_mean": s.timings.total.mean,
            })
        })
        .collect();
    print_json(&json!({ "out": out, "settings": rows }));
    Ok(())
}

fn cmd_sweep_sigma(a: SweepSigmaArgs) -> CliResult {
    let graph = Graph::load(&a.graph)?;
    let params = a.bench.params(a.sigmas.first().copied().unwrap_or(f64::NAN));
    let report = sweep_sigma(&graph, &params, a.k, &a.sigmas)?;
    save_report(&report, &a.out)
}

fn cmd_sweep_k(a: SweepKArgs) -> CliResult {
    let graph = Graph::load(&a.graph)?;
    let report = sweep_k(&graph, &a.bench.params(a.sigma), &a.ks)?;
    save_report(&report, &a.out)
}

fn cmd_timing(a: TimingArgs) -> CliResult {
    let seed = a.bench.pipeline.seed;
    let template = match a.family {
        FamilyArg::SwissRoll => GeneratorSpec::swiss_roll(0, seed),
        FamilyArg::Community => GeneratorSpec::community(0, 8, seed),
        FamilyArg::Cycle => GeneratorSpec::cycle(0),
        FamilyArg::Path => GeneratorSpec::path(0),
        FamilyArg::Grid => {
            return Err(rwf_core::Error::InvalidParams(
                "grid graphs cannot be resized by N alone".into(),
            ))
        }
    };
    let report = timing(&a.bench.params(a.sigma), &template, &a.ns, &a.ks)?;
    save_report(&report, &a.out)
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let graph = Graph::load(&a.graph)?;
    let report = sweep_sigma(&graph, &a.bench.params(a.sigma), a.k, &[a.sigma])?;
    if let Some(out) = &a.out {
        report.save(out)?;
    }
    let summary = &report.summaries[0];
    let e_p_holds = report
        .records
        .iter()
        .all(|r| matches!((r.e_p, r.bound_e_p), (Some(e), Some(b)) if e <= b + 1e-9));
    let mean_e_r = summary.e_r.map(|s| s.mean);
    let bound_e_r = summary.bound_e_r.map(|s| s.mean);
    let e_r_holds = match (mean_e_r, bound_e_r) {
        (Some(e), Some(b)) => Some(e <= b),
        _ => None,
    };
    print_json(&json!({
        "K": summary.k,
        "r": summary.r,
        "trials": summary.trials,
        "assumption1_failures": summary.assumption1_failures,
        "e_p_within_bound_every_trial": e_p_holds,
        "mean_e_r": mean_e_r,
        "bound_e_r": bound_e_r,
        "mean_e_r_within_bound": e_r_holds,
        "records": report.records.iter().map(|r| json!({
            "trial": r.trial,
            "e_r": r.e_r,
            "e_p": r.e_p,
            "bound_e_p": r.bound_e_p,
            "bound_e_r": r.bound_e_r,
            "assumption1_holds": r.assumption1_holds,
        })).collect::<Vec<_>>(),
    }));
    if !e_p_holds {
        return Err(rwf_core::Error::AssumptionViolated(
            "measured E_P exceeds 2 eps_h + eps_h^2".into(),
        ));
    }
    Ok(())
}

fn cmd_mc(a: McArgs) -> CliResult {
    let m = mc_gaussian_pseudoinverse(a.k, a.r, a.trials, a.seed)?;
    let (k, r) = (a.k as f64, a.r as f64);
    print_json(&json!({
        "K": a.k,
        "r": a.r,
        "trials": a.trials,
        "rms_frobenius": m.rms_frobenius,
        "expected_rms_frobenius": (k / (r - 1.0)).sqrt(),
        "mean_spectral": m.mean_spectral,
        "mean_spectral_bound": std::f64::consts::E * (k + r).sqrt() / r,
        "default_oversampling_for_K": default_oversampling(a.k),
    }));
    Ok(())
}
