//! Randomized low-rank approximation of Laplacian graph kernels.
//!
//! A kernel `Gamma = h(L)` on the normalized Laplacian is approximated by
//! node embeddings `Phi` with `Phi^T Phi ~ Gamma`:
//!
//! 1. estimate `lambda_K` by bisection on polynomial eigenvalue counts
//!    ([`spectral`]),
//! 2. filter `K + r` Gaussian probes with a Jackson-damped low-pass polynomial
//!    and orthonormalize them ([`rwf::range_find`]),
//! 3. filter the basis with a Chebyshev approximation of `h^(1/2)`
//!    ([`rwf::compute_embedding`]).
//!
//! Everything is matrix-free except the [`oracle`] module, which computes exact
//! kernels and error decompositions by dense eigendecomposition for small graphs.

pub mod error;
pub mod experiments;
pub mod filters;
pub mod generators;
pub mod graph;
pub mod laplacian;
pub mod oracle;
pub mod random;
pub mod rwf;
pub mod spectral;

pub use error::{Error, Result};
pub use filters::{ChebyshevFilter, Damping, KernelFunction};
pub use graph::Graph;
pub use laplacian::{build_normalized_laplacian, LaplacianOperator};
pub use rwf::{approximate_kernel, ApproxConfig, Embedding};
pub use spectral::EstimationConfig;
