//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails. Run with `cargo test -p rwf-core --test acceptance`.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rwf_core::experiments::{sweep_k, sweep_sigma, timing, BenchParams, ExperimentReport, KernelKind};
use rwf_core::filters::{apply_filter, indicator_filter, sqrt_kernel_filter, Damping};
use rwf_core::generators::{generate, GeneratorSpec};
use rwf_core::oracle::mc_gaussian_pseudoinverse;
use rwf_core::random::gaussian_matrix;
use rwf_core::rwf::{ortho, range_find};
use rwf_core::spectral::{estimate_lambda_k, EstimationConfig};
use rwf_core::{build_normalized_laplacian, Graph, KernelFunction};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Dense `I - D^(-1/2) W D^(-1/2)` straight from the edge list.
fn dense_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut w = DMatrix::zeros(n, n);
    for &(i, j, x) in g.edges() {
        w[(i, j)] += x;
        w[(j, i)] += x;
    }
    let d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let a = w[(i, j)] / (d[i] * d[j]).sqrt();
        if i == j {
            1.0 - a
        } else {
            -a
        }
    })
}

/// Eigenpairs sorted ascending.
fn eig(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let e = to_faer(&a).self_adjoint_eigen(faer::Side::Lower).unwrap();
    let vals = (0..n).map(|i| e.S()[i]).collect();
    (vals, DMatrix::from_fn(n, n, |i, j| e.U()[(i, j)]))
}

fn spectral(vals: &[f64], vecs: &DMatrix<f64>, f: impl Fn(f64) -> f64, count: usize) -> DMatrix<f64> {
    let v = vecs.columns(0, count);
    let mut scaled = v.into_owned();
    for j in 0..count {
        scaled.column_mut(j).scale_mut(f(vals[j]));
    }
    scaled * v.transpose()
}

fn sym_norm(a: &DMatrix<f64>) -> f64 {
    let vals = to_faer(a).self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    vals.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn cycle_spectrum(n: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..n).map(|k| 1.0 - (2.0 * PI * k as f64 / n as f64).cos()).collect();
    l.sort_by(f64::total_cmp);
    l
}

fn mean_rel_err(report: &ExperimentReport, setting: usize) -> f64 {
    report.summary(setting).unwrap().rel_err.unwrap().mean
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn ideal_case() -> Outcome {
    let graphs = [
        ("cycle", generate(&GeneratorSpec::cycle(200)).unwrap()),
        ("swiss-roll", generate(&GeneratorSpec::swiss_roll(200, 21)).unwrap()),
    ];
    let h = KernelFunction::diffusion(2.0).unwrap();
    let mut worst = 0.0_f64;
    for (_, g) in &graphs {
        let (vals, vecs) = eig(dense_laplacian(g));
        for k in [10, 50] {
            // exact projector onto the first K eigenvectors, no oversampling
            let chi = spectral(&vals, &vecs, |_| 1.0, k);
            let q = ortho(&(chi * gaussian_matrix(200, k, 5, 0))).unwrap();
            let root = spectral(&vals, &vecs, |l| h.sqrt_eval(l), 200);
            let phi = (&root * q).transpose();
            let approx = phi.tr_mul(&phi);
            let best = spectral(&vals, &vecs, |l| h.eval(l), k);
            worst = worst.max((approx - &best).norm() / best.norm());
        }
    }
    outcome(worst <= 1e-8, format!("max relative Frobenius error {worst:.2e} (<= 1e-8)"))
}

fn deterministic_filter_bound() -> Outcome {
    let kernels = [
        KernelFunction::regularized_laplacian(2.0, 2).unwrap(),
        KernelFunction::two_step_random_walk(2.0).unwrap(),
        KernelFunction::diffusion(3.0).unwrap(),
        KernelFunction::inverse_cosine(0.9).unwrap(),
    ];
    let mut runs = 0;
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    for n in [100, 300] {
        let g = generate(&GeneratorSpec::swiss_roll(n, n as u64)).unwrap();
        let op = build_normalized_laplacian(g.clone()).unwrap();
        let (vals, vecs) = eig(dense_laplacian(&g));
        let k = n / 10;
        for h in &kernels {
            let root = spectral(&vals, &vecs, |l| h.sqrt_eval(l), n);
            for m_h in [10, 30] {
                let p_h = sqrt_kernel_filter(h, m_h).unwrap();
                let eps_h = vals.iter().fold(0.0_f64, |m, &l| m.max((h.sqrt_eval(l) - p_h.eval(l)).abs()));
                let bound = 2.0 * eps_h + eps_h * eps_h + 1e-9;
                for seed in 0..20 {
                    let q = range_find(&op, k, 15, vals[k - 1], 60, seed).unwrap();
                    let exact = &root * &q;
                    let poly = apply_filter(&op, &p_h, &q).unwrap();
                    let e_p = sym_norm(&(&exact * exact.transpose() - &poly * poly.transpose()));
                    runs += 1;
                    if e_p > bound {
                        violations += 1;
                    }
                    worst_margin = worst_margin.min(bound - e_p);
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {runs} runs, smallest slack {worst_margin:.2e}"),
    )
}

fn expectation_bound() -> Outcome {
    let (n, k, r) = (128, 16, 15);
    let g = generate(&GeneratorSpec::cycle(n)).unwrap();
    let op = build_normalized_laplacian(g.clone()).unwrap();
    let h = KernelFunction::diffusion(5.0).unwrap();
    let lambdas = cycle_spectrum(n);
    let chi = indicator_filter(lambdas[k - 1], 60, Damping::Jackson).unwrap();

    let (kf, rf) = (k as f64, r as f64);
    let tail = lambdas[k..].iter().map(|&l| chi.eval(l).powi(2)).sum::<f64>().sqrt();
    let bound = h.sqrt_eval(lambdas[k])
        + 2.0 * (kf / (rf - 1.0)).sqrt() * chi.eval(lambdas[k])
        + 2.0 * E * (kf + rf).sqrt() / rf * tail;

    let (vals, vecs) = eig(dense_laplacian(&g));
    let root = spectral(&vals, &vecs, |l| h.sqrt_eval(l), n);
    let seeds = 20;
    let mean = (0..seeds)
        .map(|seed| {
            let q = range_find(&op, k, r, lambdas[k - 1], 60, seed).unwrap();
            let residual = &root - &q * q.tr_mul(&root);
            residual.singular_values().max()
        })
        .sum::<f64>()
        / seeds as f64;
    let degenerate = (lambdas[k] - lambdas[k - 1]).abs() < 1e-12;
    outcome(
        mean <= bound,
        format!(
            "mean E_R {mean:.3e} <= bound {bound:.3e} (lambda_K = lambda_K+1: {degenerate})"
        ),
    )
}

fn lemma_monte_carlo() -> Outcome {
    let m = mc_gaussian_pseudoinverse(20, 11, 2000, 9).unwrap();
    let rel = (m.rms_frobenius / 2f64.sqrt() - 1.0).abs();
    let cap = E * 31f64.sqrt() / 11.0;
    outcome(
        rel <= 0.05 && m.mean_spectral <= cap,
        format!(
            "rms ||G+||_F = {:.4} ({:.1}% from sqrt 2), mean ||G+|| = {:.4} <= {cap:.4}",
            m.rms_frobenius,
            100.0 * rel,
            m.mean_spectral
        ),
    )
}

fn sigma_trend() -> Outcome {
    let g = generate(&GeneratorSpec::swiss_roll(1000, 1)).unwrap();
    let mut params = BenchParams::new(KernelKind::Diffusion, 1.0, 11);
    params.r = Some(16);
    let report = sweep_sigma(&g, &params, 160, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let means: Vec<f64> = (0..5).map(|s| mean_rel_err(&report, s)).collect();
    let monotone = means.windows(2).all(|w| w[1] <= 1.5 * w[0]);
    let ratio = means[4] / means[0];
    let listed: Vec<String> = means.iter().map(|v| format!("{v:.2e}")).collect();
    outcome(
        monotone && ratio <= 0.1,
        format!(
            "mean errors [{}]; err(5)/err(1) = {ratio:.3} (<= 0.1), monotone up to 1.5x: {monotone}",
            listed.join(", ")
        ),
    )
}

fn k_trend() -> Outcome {
    let g = generate(&GeneratorSpec::cycle(500)).unwrap();
    let params = BenchParams::new(KernelKind::Diffusion, 5.0, 12);
    let ks = [25, 50, 100, 200, 460];
    let report = sweep_k(&g, &params, &ks).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, &k) in ks.iter().enumerate().take(4) {
        let summary = report.summary(s).unwrap();
        let mean = summary.rel_err.unwrap().mean;
        let best = summary.best_rank_k_err.unwrap();
        ok &= mean <= 5.0 * best;
        parts.push(format!("K={k}: {mean:.2e}/{best:.2e}"));
    }
    let decreasing = mean_rel_err(&report, 3) < mean_rel_err(&report, 0);
    let full = report.summary(4).unwrap();
    let full_err = full.rel_err.unwrap().max;
    let bound = full.bound_e_p.unwrap().min;
    let exact = full_err <= 10.0 * bound;
    outcome(
        ok && decreasing && exact,
        format!(
            "mean/best {}; K=200 < K=25: {decreasing}; K+r>=N max error {full_err:.2e} <= 10 x {bound:.2e}: {exact}",
            parts.join(", ")
        ),
    )
}

fn community_failure_mode() -> Outcome {
    let g = generate(&GeneratorSpec::community(400, 8, 3)).unwrap();
    let params = BenchParams::new(KernelKind::Diffusion, 5.0, 13);
    let report = sweep_k(&g, &params, &[8, 200]).unwrap();
    let small = report.summary(0).unwrap();
    let (mean8, best8) = (small.rel_err.unwrap().mean, small.best_rank_k_err.unwrap());
    let large = report.summary(1).unwrap();
    let best200 = large.best_rank_k_err.unwrap();
    let degraded = large.assumption1_failures >= 1 || large.rel_err.unwrap().mean > 10.0 * best200;
    outcome(
        mean8 <= 5.0 * best8 && degraded,
        format!(
            "K=8 mean {mean8:.2e} vs best {best8:.2e}; K=200 assumption failures {}/{}, mean {:.2e} vs best {best200:.2e}",
            large.assumption1_failures,
            large.trials,
            large.rel_err.unwrap().mean
        ),
    )
}

fn scaling() -> Outcome {
    let mut params = BenchParams::new(KernelKind::Diffusion, 3.0, 14);
    params.trials = 3;
    let template = GeneratorSpec::swiss_roll(2000, 4);
    let ks = [50, 100, 200, 400];
    let by_k = timing(&params, &template, &[2000], &ks).unwrap();
    let filtering: Vec<f64> = by_k
        .summaries
        .iter()
        .map(|s| s.timings.chi_filter.mean + s.timings.h_filter.mean)
        .collect();
    let lambda: Vec<f64> = by_k.summaries.iter().map(|s| s.timings.lambda_k.mean).collect();
    let kx: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let k_slope = slope(&kx, &filtering);
    let lambda_ratio = lambda.iter().copied().fold(0.0, f64::max) / lambda.iter().copied().fold(f64::INFINITY, f64::min);

    let ns = [1000, 2000, 4000, 8000];
    let by_n = timing(&params, &template, &ns, &[100]).unwrap();
    let total: Vec<f64> = by_n.summaries.iter().map(|s| s.timings.total.mean).collect();
    let nx: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let n_slope = slope(&nx, &total);

    let pass = (0.7..=1.3).contains(&k_slope) && (0.7..=1.4).contains(&n_slope) && lambda_ratio <= 2.0;
    outcome(
        pass,
        format!(
            "filtering slope vs K {k_slope:.2} in [0.7, 1.3]; total slope vs N {n_slope:.2} in [0.7, 1.4]; lambda_K time max/min {lambda_ratio:.2} <= 2"
        ),
    )
}

fn lambda_estimation() -> Outcome {
    let n = 500;
    let g = generate(&GeneratorSpec::cycle(n)).unwrap();
    let op = build_normalized_laplacian(g).unwrap();
    let lambdas = cycle_spectrum(n);
    let counts: Vec<usize> = (0..10)
        .map(|seed| {
            let cfg = EstimationConfig::for_graph_size(n, seed).with_tolerance(0.02);
            let est = estimate_lambda_k(&op, 50, &cfg).unwrap();
            lambdas.iter().filter(|&&l| l <= est).count()
        })
        .collect();
    outcome(
        counts.iter().all(|c| (40..=65).contains(c)),
        format!("exact counts at the estimates {counts:?} in [40, 65]"),
    )
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 9] = [
        ("ideal-case exactness", 10, ideal_case),
        ("deterministic filtering bound", 30, deterministic_filter_bound),
        ("range-finding expectation bound", 30, expectation_bound),
        ("Gaussian pseudo-inverse moments", 20, lemma_monte_carlo),
        ("error decreases with sigma", 180, sigma_trend),
        ("error vs K tracks best rank-K", 180, k_trend),
        ("community graph failure mode", 120, community_failure_mode),
        ("time scaling in K and N", 300, scaling),
        ("lambda_K estimation", 30, lambda_estimation),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(*budget);
        let pass = result.pass && in_budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {} [{:.1}s / {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
