//! Kernel spectral functions and Chebyshev polynomial filters on `[0, 2]`.
//!
//! A filter of degree `M` represents
//! `p(lambda) = c_0 / 2 + sum_{j=1..M} c_j T_j(lambda - 1)`,
//! so that `p(L) X` is evaluated with `M` sparse matrix-block products through
//! the three-term recurrence on the shifted operator `L - I`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::LaplacianOperator;

/// Spectral profile `h` of a graph kernel `Gamma = h(L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelFunction {
    /// `(1 + sigma^2 lambda)^(-d)`
    RegularizedLaplacian { sigma: f64, d: u32 },
    /// `(1 - lambda / sigma)^2`, `sigma >= 2`
    TwoStepRandomWalk { sigma: f64 },
    /// `exp(-sigma^2 lambda)`
    Diffusion { sigma: f64 },
    /// `cos(sigma^2 lambda pi / 4)`, `|sigma| <= 1`
    InverseCosine { sigma: f64 },
    /// Piecewise-linear interpolation of `(lambda, h)` samples covering `[0, 2]`.
    CustomTabulated { lambdas: Vec<f64>, values: Vec<f64> },
}

const GRID_POINTS: usize = 1001;

impl KernelFunction {
    pub fn regularized_laplacian(sigma: f64, d: u32) -> Result<Self> {
        let h = Self::RegularizedLaplacian { sigma, d };
        h.validate()?;
        Ok(h)
    }

    pub fn two_step_random_walk(sigma: f64) -> Result<Self> {
        let h = Self::TwoStepRandomWalk { sigma };
        h.validate()?;
        Ok(h)
    }

    pub fn diffusion(sigma: f64) -> Result<Self> {
        let h = Self::Diffusion { sigma };
        h.validate()?;
        Ok(h)
    }

    pub fn inverse_cosine(sigma: f64) -> Result<Self> {
        let h = Self::InverseCosine { sigma };
        h.validate()?;
        Ok(h)
    }

    pub fn custom_tabulated(lambdas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let h = Self::CustomTabulated { lambdas, values };
        h.validate()?;
        Ok(h)
    }

    /// Short identifier used in reports (`dreg`, `rw2`, `diffusion`, `invcos`, `tabulated`).
    pub fn short_name(&self) -> &'static str {
        match self {
            Self::RegularizedLaplacian { .. } => "dreg",
            Self::TwoStepRandomWalk { .. } => "rw2",
            Self::Diffusion { .. } => "diffusion",
            Self::InverseCosine { .. } => "invcos",
            Self::CustomTabulated { .. } => "tabulated",
        }
    }

    /// The bandwidth parameter, if the kind has one.
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            Self::RegularizedLaplacian { sigma, .. }
            | Self::TwoStepRandomWalk { sigma }
            | Self::Diffusion { sigma }
            | Self::InverseCosine { sigma } => Some(sigma),
            Self::CustomTabulated { .. } => None,
        }
    }

    /// Checks parameter domains, `h(0) = 1`, and that `h` is non-negative and
    /// non-increasing on a 1001-point grid of `[0, 2]`.
    pub fn validate(&self) -> Result<()> {
        let out = |msg: String| Err(Error::ParameterOutOfDomain(msg));
        match self {
            Self::RegularizedLaplacian { sigma, d } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return out(format!("regularized Laplacian needs sigma > 0, got {sigma}"));
                }
                if *d == 0 {
                    return out("regularized Laplacian needs d >= 1".into());
                }
            }
            Self::TwoStepRandomWalk { sigma } => {
                if !(sigma.is_finite() && *sigma >= 2.0) {
                    return out(format!("two-step random walk needs sigma >= 2, got {sigma}"));
                }
            }
            Self::Diffusion { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return out(format!("diffusion needs sigma > 0, got {sigma}"));
                }
            }
            Self::InverseCosine { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0 && *sigma <= 1.0) {
                    return out(format!("inverse cosine needs 0 < sigma <= 1, got {sigma}"));
                }
            }
            Self::CustomTabulated { lambdas, values } => {
                if lambdas.len() < 2 || lambdas.len() != values.len() {
                    return out("tabulated kernel needs >= 2 matching (lambda, h) samples".into());
                }
                if lambdas.windows(2).any(|w| w[1] <= w[0]) {
                    return out("tabulated lambdas must be strictly increasing".into());
                }
                if lambdas[0] > 0.0 || *lambdas.last().unwrap() < 2.0 {
                    return out("tabulated lambdas must cover [0, 2]".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return out("tabulated values must be finite".into());
                }
            }
        }
        if (self.eval(0.0) - 1.0).abs() > 1e-12 {
            return out(format!("h(0) = {} != 1", self.eval(0.0)));
        }
        let mut previous = f64::INFINITY;
        for q in 0..GRID_POINTS {
            let lambda = 2.0 * q as f64 / (GRID_POINTS - 1) as f64;
            let v = self.eval(lambda);
            if v < 0.0 || v > previous + 1e-14 {
                return out(format!("h is not non-negative and non-increasing at {lambda}"));
            }
            previous = v;
        }
        Ok(())
    }

    /// Evaluates `h(lambda)`; `lambda` is clamped to `[0, 2]`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let lambda = lambda.clamp(0.0, 2.0);
        match self {
            Self::RegularizedLaplacian { sigma, d } => {
                (1.0 + sigma * sigma * lambda).powi(-(*d as i32))
            }
            Self::TwoStepRandomWalk { sigma } => (1.0 - lambda / sigma).powi(2),
            Self::Diffusion { sigma } => (-sigma * sigma * lambda).exp(),
            Self::InverseCosine { sigma } => (sigma * sigma * lambda * PI / 4.0).cos(),
            Self::CustomTabulated { lambdas, values } => {
                let k = lambdas.partition_point(|&l| l <= lambda);
                if k == 0 {
                    return values[0];
                }
                if k == lambdas.len() {
                    return values[k - 1];
                }
                let t = (lambda - lambdas[k - 1]) / (lambdas[k] - lambdas[k - 1]);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        }
    }

    /// `h(lambda)^(1/2)`, the spectral profile of the embedding filter.
    pub fn sqrt_eval(&self, lambda: f64) -> f64 {
        self.eval(lambda).max(0.0).sqrt()
    }
}

/// Validates the kernel and `lambda` and returns `h(lambda)`.
pub fn eval_kernel_function(h: &KernelFunction, lambda: f64) -> Result<f64> {
    h.validate()?;
    if !(0.0..=2.0).contains(&lambda) {
        return Err(Error::ParameterOutOfDomain(format!(
            "lambda = {lambda} outside [0, 2]"
        )));
    }
    Ok(h.eval(lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Damping {
    None,
    Jackson,
}

/// Chebyshev expansion of degree `M` on `[0, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevFilter {
    degree: usize,
    damping: Damping,
    /// Final (already damped) coefficients `c_0..c_M`.
    coefficients: Vec<f64>,
    #[serde(default)]
    target: String,
}

impl ChebyshevFilter {
    /// Wraps raw coefficients; `damping` is applied on top of them.
    pub fn from_coefficients(
        mut coefficients: Vec<f64>,
        damping: Damping,
        target: impl Into<String>,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidParams("a filter needs at least c_0".into()));
        }
        if let Some(c) = coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite coefficient {c}")));
        }
        let degree = coefficients.len() - 1;
        if damping == Damping::Jackson {
            for (c, g) in coefficients.iter_mut().zip(jackson_damping(degree)) {
                *c *= g;
            }
        }
        Ok(Self {
            degree,
            damping,
            coefficients,
            target: target.into(),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn damping(&self) -> Damping {
        self.damping
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    /// Clenshaw evaluation of `p(lambda)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = lambda - 1.0;
        let c = &self.coefficients;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c[1..].iter().rev() {
            let b0 = ck + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        0.5 * c[0] + x * b1 - b2
    }

    /// `p(L) X` via the three-term recurrence: exactly `M` sparse block products.
    pub fn apply(&self, op: &LaplacianOperator, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        apply_filter(op, self, x)
    }
}

/// Jackson damping factors `g_0..g_M` (kernel polynomial method form).
pub fn jackson_damping(degree: usize) -> Vec<f64> {
    let m1 = (degree + 1) as f64;
    let alpha = PI / m1;
    let cot = alpha.cos() / alpha.sin();
    (0..=degree)
        .map(|j| {
            if j == 0 {
                return 1.0;
            }
            let j = j as f64;
            ((m1 - j) * (alpha * j).cos() + (alpha * j).sin() * cot) / m1
        })
        .collect()
}

/// Chebyshev-Gauss quadrature coefficients of `f` on `[0, 2]` with `M + 1` nodes.
pub fn chebyshev_coefficients(
    f: impl Fn(f64) -> f64,
    degree: usize,
    damping: Damping,
    target: impl Into<String>,
) -> Result<ChebyshevFilter> {
    let nodes = degree + 1;
    let thetas: Vec<f64> = (0..nodes)
        .map(|q| PI * (q as f64 + 0.5) / nodes as f64)
        .collect();
    let mut samples = Vec::with_capacity(nodes);
    for &theta in &thetas {
        let lambda = 1.0 + theta.cos();
        let value = f(lambda);
        if !value.is_finite() {
            return Err(Error::NonFiniteSample { lambda, value });
        }
        samples.push(value);
    }
    let scale = 2.0 / nodes as f64;
    let coefficients = (0..=degree)
        .map(|j| {
            scale
                * thetas
                    .iter()
                    .zip(&samples)
                    .map(|(theta, v)| v * (j as f64 * theta).cos())
                    .sum::<f64>()
        })
        .collect();
    ChebyshevFilter::from_coefficients(coefficients, damping, target)
}

/// Degree-`M` approximation of the indicator of `[0, cut]`.
///
/// Uses the closed-form expansion coefficients of the step function
/// (`c_0 = 2 (pi - theta) / pi`, `c_j = -2 sin(j theta) / (j pi)` with
/// `theta = arccos(cut - 1)`), so the transition sits exactly at `cut`.
pub fn indicator_filter(cut: f64, degree: usize, damping: Damping) -> Result<ChebyshevFilter> {
    if !(cut.is_finite() && (0.0..=2.0).contains(&cut)) {
        return Err(Error::ParameterOutOfDomain(format!(
            "indicator cut {cut} outside [0, 2]"
        )));
    }
    let theta = (cut - 1.0).clamp(-1.0, 1.0).acos();
    let coefficients = (0..=degree)
        .map(|j| {
            if j == 0 {
                2.0 * (PI - theta) / PI
            } else {
                let j = j as f64;
                -2.0 * (j * theta).sin() / (j * PI)
            }
        })
        .collect();
    ChebyshevFilter::from_coefficients(coefficients, damping, format!("indicator[0, {cut}]"))
}

/// Undamped degree-`M` approximation of `h^(1/2)`, the embedding filter.
pub fn sqrt_kernel_filter(h: &KernelFunction, degree: usize) -> Result<ChebyshevFilter> {
    h.validate()?;
    chebyshev_coefficients(
        |l| h.sqrt_eval(l),
        degree,
        Damping::None,
        format!("sqrt {h:?}"),
    )
}

/// Computes `p(L) X` column by column; each column uses three scratch vectors.
pub fn apply_filter(
    op: &LaplacianOperator,
    filter: &ChebyshevFilter,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = op.num_nodes();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    let mut out = DMatrix::zeros(n, x.ncols());
    if x.ncols() == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(n)
        .zip(x.as_slice().par_chunks(n))
        .for_each(|(out_col, x_col)| filter_column(op, filter.coefficients(), x_col, out_col));
    Ok(out)
}

fn filter_column(op: &LaplacianOperator, c: &[f64], x: &[f64], out: &mut [f64]) {
    let half = 0.5 * c[0];
    for (o, xv) in out.iter_mut().zip(x) {
        *o = half * xv;
    }
    if c.len() == 1 {
        return;
    }
    let n = x.len();
    let mut prev = x.to_vec();
    let mut cur = vec![0.0; n];
    op.adjacency_apply(x, &mut cur);
    for v in cur.iter_mut() {
        *v = -*v;
    }
    axpy(c[1], &cur, out);
    let mut next = vec![0.0; n];
    for &cj in &c[2..] {
        op.chebyshev_step(&cur, &prev, &mut next);
        axpy(cj, &next, out);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}
