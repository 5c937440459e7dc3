//! Bi-stochastically normalized graph Laplacians on manifold data with
//! outlier noise.
//!
//! The pipeline: sample points on a closed curve ([`manifold`]), optionally
//! corrupt them with high-dimensional outliers ([`noise`]), build a Gaussian
//! affinity ([`kernel`]), scale it to approximately bi-stochastic form with
//! early-terminated Sinkhorn-Knopp iterations ([`sinkhorn`]), and compare the
//! resulting Laplacian ([`laplacian`]) with the analytic weighted Laplacian
//! or the circle harmonics ([`experiments`]).

pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kernel;
pub mod laplacian;
pub mod manifold;
pub mod matrix;
pub mod noise;
pub mod rng;
pub mod sinkhorn;

pub use error::{Error, Result};
pub use kernel::{build_affinity, degree, gaussian_kernel, kernel_moments, Affinity, DegreeVector, KernelConvention};
pub use laplacian::{
    apply_rescaled, bistochastic_affinity, build_laplacian, dm_affinity, laplacian_from_affinity, smallest_eigenpairs,
    EigenPairs, LaplacianForm, LaplacianKind, LaplacianOp,
};
pub use manifold::{
    curve_point, delta_p_f, density, density_cdf, embed_ambient, sample_dataset, test_function, Dataset, DensitySpec,
};
pub use matrix::Matrix;
pub use noise::{add_noise, cross_term_stats, HetPhase, NoiseKind, NoiseModel};
pub use rng::SeededRng;
pub use sinkhorn::{approx_sym_sk, population_reference, scaling_residual, ScalingResult, SkConfig, SkInit};
