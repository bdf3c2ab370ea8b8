//! Dense ground truth for small graphs.
//!
//! Exact kernels `V h(Lambda) V^T`, best rank-`K` truncations, spectral-norm
//! error metrics, the polynomial error constants `eps_chi` / `eps_h`, the
//! error bounds for the range-finding and filtering parts, and a Monte-Carlo
//! check of Gaussian pseudo-inverse moments.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{ChebyshevFilter, KernelFunction};
use crate::laplacian::LaplacianOperator;
use crate::random::stream;

/// Largest `N` for which dense `O(N^3)` factorizations are attempted by default.
pub const DEFAULT_DENSE_CAP: usize = 3000;

/// Tolerance under which two consecutive eigenvalues count as equal.
pub const EIGENVALUE_TIE: f64 = 1e-10;

/// Anything that can be evaluated on the spectrum: polynomial filters,
/// closures, exact indicators.
pub trait SpectralProfile {
    fn value(&self, lambda: f64) -> f64;
}

impl SpectralProfile for ChebyshevFilter {
    fn value(&self, lambda: f64) -> f64 {
        self.eval(lambda)
    }
}

impl<F: Fn(f64) -> f64> SpectralProfile for F {
    fn value(&self, lambda: f64) -> f64 {
        self(lambda)
    }
}

/// `L = V Lambda V^T` with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

pub fn dense_eigendecomposition(op: &LaplacianOperator) -> Result<EigenSystem> {
    dense_eigendecomposition_capped(op, DEFAULT_DENSE_CAP)
}

pub fn dense_eigendecomposition_capped(op: &LaplacianOperator, cap: usize) -> Result<EigenSystem> {
    let n = op.num_nodes();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    Ok(EigenSystem::from_symmetric(op.to_dense()))
}

impl EigenSystem {
    /// Factorizes a dense symmetric matrix.
    pub fn from_symmetric(a: DMatrix<f64>) -> Self {
        let n = a.nrows();
        let eig = to_faer(&a)
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("symmetric eigendecomposition did not converge");
        let (u, s) = (eig.U(), eig.S());
        Self {
            eigenvalues: DVector::from_fn(n, |i, _| s[i]),
            eigenvectors: DMatrix::from_fn(n, n, |i, j| u[(i, j)]),
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `lambda_k` with 1-based `k`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k - 1]
    }

    /// `V_{:K}`, the first `K` eigenvectors.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.eigenvectors.columns(0, k).into_owned()
    }

    /// Number of eigenvalues `<= t`.
    pub fn count_at_most(&self, t: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l <= t).count()
    }

    /// `V f(Lambda) V^T`.
    pub fn spectral_matrix(&self, f: &impl SpectralProfile) -> DMatrix<f64> {
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f.value(l)).collect();
        self.weighted_outer(&weights, self.len())
    }

    /// `sum_{k < count} w_k v_k v_k^T`.
    fn weighted_outer(&self, weights: &[f64], count: usize) -> DMatrix<f64> {
        let v = self.eigenvectors.columns(0, count);
        let mut scaled = v.into_owned();
        for (j, w) in weights.iter().take(count).enumerate() {
            scaled.column_mut(j).scale_mut(*w);
        }
        scaled * v.transpose()
    }

    /// Spectral-domain coordinates `V^T X`.
    pub fn to_spectral(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.eigenvectors.tr_mul(x)
    }
}

/// `Gamma = V h(Lambda) V^T`.
pub fn exact_kernel(es: &EigenSystem, h: &KernelFunction) -> DMatrix<f64> {
    es.spectral_matrix(&|l| h.eval(l))
}

/// `Gamma^(K) = sum_{k <= K} h(lambda_k) v_k v_k^T`.
pub fn best_rank_k(es: &EigenSystem, h: &KernelFunction, k: usize) -> Result<DMatrix<f64>> {
    let n = es.len();
    if k < 1 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let weights: Vec<f64> = es.eigenvalues.iter().map(|&l| h.eval(l)).collect();
    Ok(es.weighted_outer(&weights, k))
}

/// Spectral error of the best rank-`K` approximation: `h(lambda_{K+1})`, or 0 for `K = N`.
pub fn best_rank_k_error(es: &EigenSystem, h: &KernelFunction, k: usize) -> f64 {
    if k >= es.len() {
        0.0
    } else {
        h.eval(es.eigenvalues[k])
    }
}

/// Spectral norm of a dense symmetric matrix (largest absolute eigenvalue).
pub fn symmetric_spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    to_faer(a)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("symmetric eigendecomposition did not converge")
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Spectral norm of a general dense matrix (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Spectral norm of `A A^T - B B^T` through a `2k x 2k` reduced eigenproblem.
fn gram_difference_norm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (n, k) = a.shape();
    if k == 0 {
        return 0.0;
    }
    let mut w = DMatrix::zeros(n, 2 * k);
    w.columns_mut(0, k).copy_from(a);
    w.columns_mut(k, k).copy_from(b);
    if 2 * k >= n {
        return symmetric_spectral_norm(&(a * a.transpose() - b * b.transpose()));
    }
    // W S W^T has the nonzero spectrum of R S R^T, with W = Q R
    let r = w.qr().r();
    let mut rs = r.clone();
    for j in k..2 * k {
        rs.column_mut(j).neg_mut();
    }
    let m = rs * r.transpose();
    symmetric_spectral_norm(&(0.5 * (&m + m.transpose())))
}

/// Result of a power-iteration norm estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Lower bound on the spectral norm.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Power iteration for the spectral norm of a symmetric operator.
///
/// Runs from a seeded Gaussian start and from one random restart and keeps the
/// larger estimate. Convergence means successive estimates differ by less than
/// `tol` relative.
pub fn power_spectral_norm(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> NormEstimate {
    let run = |stream_id: u64| {
        let mut rng = stream(seed, &[0x70, stream_id]);
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut x);
        let mut estimate = 0.0;
        for it in 1..=max_iters {
            let mut y = apply(&x);
            let norm = normalize(&mut y);
            if norm == 0.0 {
                return NormEstimate {
                    value: 0.0,
                    converged: true,
                    iterations: it,
                };
            }
            let change = (norm - estimate).abs();
            estimate = norm;
            x = y;
            if change <= tol * norm {
                return NormEstimate {
                    value: estimate,
                    converged: true,
                    iterations: it,
                };
            }
        }
        NormEstimate {
            value: estimate,
            converged: false,
            iterations: max_iters,
        }
    };
    let first = run(0);
    let restart = run(1);
    let best = if restart.value > first.value { restart } else { first };
    NormEstimate {
        iterations: first.iterations + restart.iterations,
        ..best
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// `||A - B|| / ||A||` for symmetric operators given as matvecs, both norms
/// estimated by power iteration.
pub fn relative_spectral_error(
    a_apply: impl Fn(&[f64]) -> Vec<f64>,
    b_apply: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    iters: usize,
    tol: f64,
    seed: u64,
) -> NormEstimate {
    let reference = power_spectral_norm(&a_apply, n, iters, tol, seed);
    let diff = power_spectral_norm(
        |x| {
            let a = a_apply(x);
            let b = b_apply(x);
            a.iter().zip(&b).map(|(p, q)| p - q).collect()
        },
        n,
        iters,
        tol,
        seed,
    );
    NormEstimate {
        value: if reference.value > 0.0 {
            diff.value / reference.value
        } else {
            f64::NAN
        },
        converged: reference.converged && diff.converged,
        iterations: reference.iterations + diff.iterations,
    }
}

/// Exact `||A - B|| / ||A||` for dense symmetric matrices.
pub fn relative_spectral_error_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    symmetric_spectral_norm(&(a - b)) / symmetric_spectral_norm(a)
}

/// Polynomial approximation constants and the low-pass filter assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDiagnostics {
    /// `max_{k > K} |p_chi(lambda_k)|`
    pub eps_chi: f64,
    /// `max_k |h^(1/2)(lambda_k) - p_h(lambda_k)|`
    pub eps_h: f64,
    /// `lambda_K != lambda_{K+1}` and `1/2 <= p_chi(lambda_k) <= 1 + eps_chi` for `k <= K`.
    pub assumption1: bool,
}

pub fn epsilon_diagnostics(
    es: &EigenSystem,
    p_chi: &impl SpectralProfile,
    p_h: &impl SpectralProfile,
    h: &KernelFunction,
    k: usize,
) -> Result<EpsilonDiagnostics> {
    let n = es.len();
    if k < 1 || k >= n {
        return Err(Error::KOutOfRange { k, n: n.saturating_sub(1) });
    }
    let lambdas = es.eigenvalues.as_slice();
    let eps_chi = lambdas[k..]
        .iter()
        .fold(0.0_f64, |m, &l| m.max(p_chi.value(l).abs()));
    let eps_h = lambdas
        .iter()
        .fold(0.0_f64, |m, &l| m.max((h.sqrt_eval(l) - p_h.value(l)).abs()));
    let separated = lambdas[k] - lambdas[k - 1] > EIGENVALUE_TIE;
    let pass_band = lambdas[..k].iter().all(|&l| {
        let p = p_chi.value(l);
        (0.5..=1.0 + eps_chi).contains(&p)
    });
    Ok(EpsilonDiagnostics {
        eps_chi,
        eps_h,
        assumption1: separated && pass_band,
    })
}

/// Right-hand sides of the filtering and range-finding error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// `2 eps_h + eps_h^2`, deterministic bound on `E_P`.
    pub bound_e_p: f64,
    /// Bound on the expectation of `E_R`.
    pub bound_e_r: f64,
}

/// Evaluates both bounds, refusing when the low-pass filter assumption fails.
pub fn proposition1_bounds(
    es: &EigenSystem,
    p_chi: &impl SpectralProfile,
    h: &KernelFunction,
    k: usize,
    r: usize,
    eps_h: f64,
) -> Result<ErrorBounds> {
    let diag = epsilon_diagnostics(es, p_chi, &|l| h.sqrt_eval(l), h, k)?;
    if !diag.assumption1 {
        let lambdas = es.eigenvalues();
        return Err(Error::AssumptionViolated(format!(
            "lambda_K = {}, lambda_K+1 = {}, min_(k<=K) p_chi(lambda_k) = {}",
            lambdas[k - 1],
            lambdas[k],
            lambdas.iter().take(k).map(|&l| p_chi.value(l)).fold(f64::INFINITY, f64::min)
        )));
    }
    proposition1_bounds_unchecked(es, p_chi, h, k, r, eps_h)
}

/// Evaluates the bound formulas without checking the filter assumption.
pub fn proposition1_bounds_unchecked(
    es: &EigenSystem,
    p_chi: &impl SpectralProfile,
    h: &KernelFunction,
    k: usize,
    r: usize,
    eps_h: f64,
) -> Result<ErrorBounds> {
    let n = es.len();
    if k < 2 || k >= n {
        return Err(Error::KOutOfRange { k, n: n.saturating_sub(1) });
    }
    if r < 2 {
        return Err(Error::InvalidParams(format!("oversampling r = {r} < 2")));
    }
    let lambdas = es.eigenvalues.as_slice();
    let (kf, rf) = (k as f64, r as f64);
    let next = lambdas[k];
    let tail = lambdas[k..]
        .iter()
        .map(|&l| p_chi.value(l).powi(2))
        .sum::<f64>()
        .sqrt();
    let bound_e_r = h.sqrt_eval(next)
        + 2.0 * (kf / (rf - 1.0)).sqrt() * p_chi.value(next)
        + 2.0 * E * (kf + rf).sqrt() / rf * tail;
    Ok(ErrorBounds {
        bound_e_p: 2.0 * eps_h + eps_h * eps_h,
        bound_e_r,
    })
}

/// Measured error decomposition for a basis `Q` and embedding filter `p_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredErrors {
    /// `||(I - Q Q^T) h^(1/2)(L)||`
    pub e_r: f64,
    /// `||h^(1/2)(L) Q Q^T h^(1/2)(L) - p_h(L) Q Q^T p_h(L)||`
    pub e_p: f64,
    /// `||h(L) - p_h(L) Q Q^T p_h(L)||`
    pub total: f64,
}

impl MeasuredErrors {
    pub fn decomposition_holds(&self, slack: f64) -> bool {
        self.total <= self.e_r * self.e_r + self.e_p + slack
    }
}

/// Computes `E_R`, `E_P` and `E` densely, in the eigenbasis of `L`.
pub fn measured_errors(
    es: &EigenSystem,
    h: &KernelFunction,
    q: &DMatrix<f64>,
    p_h: &impl SpectralProfile,
) -> Result<MeasuredErrors> {
    let n = es.len();
    if q.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q.nrows(),
        });
    }
    let lambdas = es.eigenvalues.as_slice();
    let c = es.to_spectral(q);
    let root: Vec<f64> = lambdas.iter().map(|&l| h.sqrt_eval(l)).collect();
    let poly: Vec<f64> = lambdas.iter().map(|&l| p_h.value(l)).collect();
    let scale_rows = |weights: &[f64]| {
        let mut m = c.clone();
        for (i, w) in weights.iter().enumerate() {
            m.row_mut(i).scale_mut(*w);
        }
        m
    };
    let root_c = scale_rows(&root);
    let poly_c = scale_rows(&poly);

    // (I - C C^T) diag(h^(1/2)), formed explicitly to avoid cancellation
    let mut range_residual = -(&c * root_c.transpose());
    for (i, a) in root.iter().enumerate() {
        range_residual[(i, i)] += a;
    }
    let e_r = symmetric_spectral_norm(&range_residual.tr_mul(&range_residual)).sqrt();
    let e_p = gram_difference_norm(&root_c, &poly_c);

    let mut total = -(&poly_c * poly_c.transpose());
    for (i, &l) in lambdas.iter().enumerate() {
        total[(i, i)] += h.eval(l);
    }
    let total = symmetric_spectral_norm(&total);
    Ok(MeasuredErrors { e_r, e_p, total })
}

/// Sine of the largest principal angle between `span(V)` and `span(Q)`:
/// `||(I - Q Q^T) V||` for orthonormal `V` and `Q`.
pub fn max_principal_sine(q: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let residual = v - q * q.tr_mul(v);
    spectral_norm(&residual).min(1.0)
}

/// Monte-Carlo moments of the pseudo-inverse of a `K x (K + r)` Gaussian matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoinverseMoments {
    /// `(mean ||G^+||_F^2)^(1/2)`
    pub rms_frobenius: f64,
    /// `mean ||G^+||`
    pub mean_spectral: f64,
}

pub fn mc_gaussian_pseudoinverse(k: usize, r: usize, trials: usize, seed: u64) -> Result<PseudoinverseMoments> {
    if k < 2 || r < 2 {
        return Err(Error::InvalidParams(format!("need K >= 2 and r >= 2, got K = {k}, r = {r}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let samples: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, &[0x1e, t as u64]);
            let g = DMatrix::<f64>::from_fn(k, k + r, |_, _| rng.sample(StandardNormal));
            let s = g.singular_values();
            let frob_sq: f64 = s.iter().map(|v| v.powi(-2)).sum();
            (frob_sq, 1.0 / s.min())
        })
        .collect();
    let count = trials as f64;
    Ok(PseudoinverseMoments {
        rms_frobenius: (samples.iter().map(|s| s.0).sum::<f64>() / count).sqrt(),
        mean_spectral: samples.iter().map(|s| s.1).sum::<f64>() / count,
    })
}

/// All per-run oracle quantities, as serialized into experiment reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub eps_chi: f64,
    pub eps_h: f64,
    pub assumption1_holds: bool,
    pub e_r: f64,
    pub e_p: f64,
    pub bound_e_p: f64,
    pub bound_e_r: f64,
    pub rel_spectral_error: f64,
}

/// Oracle diagnostics of one run: basis `q`, filters `p_chi`, `p_h`, kernel `h`.
///
/// `bound_e_r` is evaluated whether or not the filter assumption holds (it is
/// flagged in `assumption1_holds`); it is NaN when `K < 2`, `r < 2` or `K >= N`.
pub fn diagnostics(
    es: &EigenSystem,
    q: &DMatrix<f64>,
    p_chi: &impl SpectralProfile,
    p_h: &impl SpectralProfile,
    h: &KernelFunction,
    k: usize,
    r: usize,
) -> Result<DiagnosticsReport> {
    let n = es.len();
    let measured = measured_errors(es, h, q, p_h)?;
    let reference = exact_norm(es, h);
    let (eps_chi, eps_h, assumption1_holds) = if k < n {
        let d = epsilon_diagnostics(es, p_chi, p_h, h, k)?;
        (d.eps_chi, d.eps_h, d.assumption1)
    } else {
        let eps_h = es
            .eigenvalues
            .iter()
            .fold(0.0_f64, |m, &l| m.max((h.sqrt_eval(l) - p_h.value(l)).abs()));
        (0.0, eps_h, true)
    };
    let bound_e_r = proposition1_bounds_unchecked(es, p_chi, h, k, r, eps_h)
        .map(|b| b.bound_e_r)
        .unwrap_or(if k >= n { 0.0 } else { f64::NAN });
    Ok(DiagnosticsReport {
        eps_chi,
        eps_h,
        assumption1_holds,
        e_r: measured.e_r,
        e_p: measured.e_p,
        bound_e_p: 2.0 * eps_h + eps_h * eps_h,
        bound_e_r,
        rel_spectral_error: measured.total / reference,
    })
}

/// `||h(L)|| = max_k h(lambda_k)`.
pub fn exact_norm(es: &EigenSystem, h: &KernelFunction) -> f64 {
    es.eigenvalues.iter().fold(0.0, |m, &l| m.max(h.eval(l).abs()))
}
