//! Contraction certificates for cone-preserving multilinear maps and a
//! certified normalized power iteration on products of positive cones.
//!
//! Everything here works on the interior of the positive orthant, where the
//! Hilbert projective metric reduces to
//! `d(x, y) = max_k log(x_k / y_k) + max_k log(y_k / x_k)`.
//! A family of maps `f_i` acting on a product of such cones is certified
//! through a nonnegative Lipschitz matrix `A` with
//! `delta(f(x), f(y)) <= A delta(x, y)` componentwise; when `rho(A) < 1`
//! the normalized power sequence converges to the unique positive solution.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cone;
pub mod contraction;
pub mod error;
pub mod kernel;
mod linalg;
pub mod solver;

pub use cone::{
    hilbert_distance, normalize, product_distance, sup_ratio, MetricVector, Normalization,
    PositiveVector, ProductPoint,
};
pub use contraction::{
    apriori_bound, binomial_envelope, birkhoff_ratio, left_perron_vector, linear_diameter,
    lipschitz_sample_check, rate_bound, spectral_radius, ContractionCertificate, NonnegMatrix,
    ProductMap, RateBound, SampleReport, CERTIFICATION_MARGIN,
};
pub use error::{Error, Result};
pub use kernel::{
    cross_ratio_brute, cross_ratio_capped, hilbert_cross_ratio, hilbert_tensor, lipschitz_matrices,
    lipschitz_matrices_from, mode_operator, scaled_operator, DenseKernel, ExponentSpec, FiberTable,
    IntegralOperator, KernelStructure, ProblemSpec, DEFAULT_CROSS_RATIO_CAP,
};
pub use solver::{
    generic_fixed_point, global_lambda_solve, hilbert_norm_bound, power_step, solve_eigen_system,
    solve_eigen_system_observed, solve_with_certificate, tensor_norm, FixedPoint, GlobalSolution,
    SolveOptions, SolveResult, TensorNorm,
};
