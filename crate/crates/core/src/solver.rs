//! Fixed-point engine on products of metric spaces and the normalized power
//! iteration for `f_i(x) = lambda_i x_i^gamma_i`.

use alloc::vec::Vec;

use crate::cone::{product_distance, MetricVector, Normalization, PositiveVector, ProductPoint};
use crate::contraction::{
    apriori_bound, binomial_envelope, rate_bound, ContractionCertificate, NonnegMatrix, RateBound,
};
use crate::error::{Error, Result};
use crate::kernel::{
    hilbert_tensor, lipschitz_matrices, mode_operator, mode_operator_logs,
    normalized_scaled_operator, ExponentSpec, ProblemSpec,
};

/// Residual logs are thinned to at most this many entries.
pub const MAX_LOGGED_RESIDUALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once the largest per-factor distance between successive
    /// iterates is at most `tol` (Hilbert-metric units for cone problems).
    pub tol: f64,
    pub max_iter: usize,
    /// Refuse to run without a contraction certificate.
    pub require_certificate: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            require_certificate: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::Precondition(
                "tol must be positive and max_iter at least 1",
            ));
        }
        Ok(())
    }
}

/// Append-only residual log that halves its resolution whenever it fills up.
#[derive(Debug, Clone, Default)]
struct ResidualLog {
    values: Vec<f64>,
    stride: usize,
    last: Option<(usize, f64)>,
}

impl ResidualLog {
    fn new() -> Self {
        Self {
            values: Vec::new(),
            stride: 1,
            last: None,
        }
    }

    /// Records the residual of iteration `n` (1-based).
    fn push(&mut self, n: usize, r: f64) {
        if (n - 1).is_multiple_of(self.stride) {
            if self.values.len() == MAX_LOGGED_RESIDUALS {
                let kept: Vec<f64> = self.values.iter().copied().step_by(2).collect();
                self.values = kept;
                self.stride *= 2;
            }
            if (n - 1).is_multiple_of(self.stride) {
                self.values.push(r);
                self.last = None;
                return;
            }
        }
        self.last = Some((n, r));
    }

    fn finish(mut self) -> Vec<f64> {
        if let Some((_, r)) = self.last {
            if self.values.len() == MAX_LOGGED_RESIDUALS {
                self.values.pop();
            }
            self.values.push(r);
        }
        self.values
    }
}

/// Outcome of [`generic_fixed_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint<T> {
    pub point: Vec<T>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub certificate: Option<ContractionCertificate>,
    /// `(I - A)^-1 A^n delta(f(x0), x0)` at the final iterate.
    pub certified_error: Option<MetricVector>,
}

/// Iterates `x <- f(x)` on a product of metric spaces until the largest
/// per-factor step is at most `opts.tol`.
///
/// `metric(i, a, b)` is the distance on factor `i`. With `rho(A) < 1` the
/// result carries the a priori bound on its distance to the fixed point.
pub fn generic_fixed_point<T, F, D>(
    mut map: F,
    metric: D,
    a: &NonnegMatrix,
    x0: Vec<T>,
    opts: &SolveOptions,
) -> Result<FixedPoint<T>>
where
    T: Clone,
    F: FnMut(&[T]) -> Result<Vec<T>>,
    D: Fn(usize, &T, &T) -> f64,
{
    opts.validate()?;
    let nu = x0.len();
    if a.dim() != nu {
        return Err(Error::Dimension {
            expected: nu,
            found: a.dim(),
        });
    }
    let cert = ContractionCertificate::from_lipschitz(a.clone())?;
    if !cert.certified && opts.require_certificate {
        return Err(Error::NoCertificate { rho: cert.rho_b });
    }
    let mut x = x0;
    let mut log = ResidualLog::new();
    let mut d1 = None;
    let mut converged = false;
    let mut iterations = 0;
    for n in 1..=opts.max_iter {
        let next = map(&x)?;
        if next.len() != nu {
            return Err(Error::Dimension {
                expected: nu,
                found: next.len(),
            });
        }
        let d: Vec<f64> = (0..nu).map(|i| metric(i, &next[i], &x[i])).collect();
        let r = d.iter().copied().fold(0.0, f64::max);
        if d1.is_none() {
            d1 = Some(
                MetricVector::new(d).map_err(|_| Error::Map("metric returned a negative value"))?,
            );
        }
        log.push(n, r);
        x = next;
        iterations = n;
        if r <= opts.tol {
            converged = true;
            break;
        }
    }
    let certified_error = match (&d1, cert.certified) {
        (Some(d1), true) => Some(apriori_bound(a, d1, iterations as u64)?),
        _ => None,
    };
    Ok(FixedPoint {
        point: x,
        iterations,
        residual_history: log.finish(),
        converged,
        certificate: cert.certified.then_some(cert),
        certified_error,
    })
}

/// Outcome of [`solve_eigen_system`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SolveResult {
    pub lambdas: Vec<f64>,
    /// Each factor lies on its unit slice.
    pub x_star: ProductPoint,
    pub iterations: usize,
    #[cfg_attr(feature = "serde", serde(rename = "residuals"))]
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Relative spread `max/min - 1` of the pointwise ratio
    /// `f_i(x*) / x*_i^gamma_i`, per factor.
    pub lambda_spread: Vec<f64>,
    pub certificate: Option<ContractionCertificate>,
    /// Rate bound on `d_i(x*_i, true solution)`, only for certified solves.
    pub certified_error: Option<RateBound>,
}

/// One step of the normalized power sequence on the scaled maps
/// `f_i^(1/gamma_i)`.
pub fn power_step(spec: &ProblemSpec, x: &ProductPoint) -> Result<ProductPoint> {
    spec.exponents.check_gamma()?;
    x.check_signature(spec.dims())?;
    ProductPoint::new(
        (0..spec.order())
            .map(|i| normalized_scaled_operator(spec, i, x))
            .collect::<Result<_>>()?,
    )
}

/// Solves `f_i(x) = lambda_i x_i^gamma_i` with the normalized power sequence.
pub fn solve_eigen_system(
    spec: &ProblemSpec,
    opts: &SolveOptions,
    x0: Option<&ProductPoint>,
) -> Result<SolveResult> {
    solve_eigen_system_observed(spec, opts, x0, |_, _| {})
}

/// [`solve_eigen_system`], calling `observer(n, x^(n))` for the normalized
/// start (`n = 0`) and every iterate.
pub fn solve_eigen_system_observed(
    spec: &ProblemSpec,
    opts: &SolveOptions,
    x0: Option<&ProductPoint>,
    observer: impl FnMut(usize, &ProductPoint),
) -> Result<SolveResult> {
    opts.validate()?;
    spec.exponents.check_gamma()?;
    let cert = match lipschitz_matrices(spec) {
        Ok((a, b)) => Some(ContractionCertificate::new(a, b)?),
        Err(Error::TooLarge { .. }) if !opts.require_certificate => None,
        Err(e) => return Err(e),
    };
    solve_with_certificate(spec, opts, x0, cert, observer)
}

/// [`solve_eigen_system_observed`] with a certificate computed by the
/// caller, e.g. from cross-ratios obtained elsewhere. `None` means no
/// certificate is available.
pub fn solve_with_certificate(
    spec: &ProblemSpec,
    opts: &SolveOptions,
    x0: Option<&ProductPoint>,
    cert: Option<ContractionCertificate>,
    mut observer: impl FnMut(usize, &ProductPoint),
) -> Result<SolveResult> {
    opts.validate()?;
    spec.exponents.check_gamma()?;
    if let Some(c) = &cert {
        if c.order() != spec.order() {
            return Err(Error::Dimension {
                expected: spec.order(),
                found: c.order(),
            });
        }
    }
    let certified = cert.as_ref().is_some_and(|c| c.certified);
    if opts.require_certificate && !certified {
        return Err(Error::NoCertificate {
            rho: cert.map_or(f64::INFINITY, |c| c.rho_b),
        });
    }

    let start = match x0 {
        Some(x) => x.clone(),
        None => ProductPoint::ones(spec.dims())?,
    };
    start.check_signature(spec.dims())?;
    let mut x = ProductPoint::new(
        start
            .factors()
            .iter()
            .enumerate()
            .map(|(i, f)| spec.normalize_factor(i, f))
            .collect::<Result<_>>()?,
    )?;
    observer(0, &x);

    let mut log = ResidualLog::new();
    let mut d10 = None;
    let mut converged = false;
    let mut iterations = 0;
    for n in 1..=opts.max_iter {
        let next = power_step(spec, &x)?;
        let d = product_distance(&next, &x)?;
        let r = d.max();
        if d10.is_none() {
            d10 = Some(d);
        }
        log.push(n, r);
        x = next;
        iterations = n;
        observer(n, &x);
        if r <= opts.tol {
            converged = true;
            break;
        }
    }

    let (lambdas, lambda_spread) = extract_lambdas(spec, &x)?;
    let certified_error = match (&cert, &d10) {
        (Some(c), Some(d10)) if c.certified => {
            let n = (iterations - 1) as u64;
            let fallback = if c.zero_weight_factors().is_empty() {
                0.0
            } else {
                fallback_constant(&c.b, c.rho_b, d10, n)?
            };
            Some(rate_bound(c, d10, n, fallback)?)
        }
        _ => None,
    };
    Ok(SolveResult {
        lambdas,
        x_star: x,
        iterations,
        residual_history: log.finish(),
        converged,
        lambda_spread,
        certificate: cert,
        certified_error,
    })
}

/// Smallest constant for which the binomial envelope dominates the a priori
/// bound `(I - B)^-1 B^(m+1) d10` at every step `m` in `[nu, n]`.
fn fallback_constant(b: &NonnegMatrix, rho: f64, d10: &MetricVector, n: u64) -> Result<f64> {
    let nu = b.dim();
    let mut c: f64 = 0.0;
    for m in nu as u64..=n {
        let profile = binomial_envelope(1.0, nu, m, rho);
        let bound = apriori_bound(b, d10, m + 1)?.max();
        if profile > 0.0 {
            c = c.max(bound / profile);
        }
    }
    Ok(c)
}

/// `lambda_i` as the geometric mean of `f_i(x)(s) / x_i(s)^gamma_i`, with the
/// relative spread of that ratio.
fn extract_lambdas(spec: &ProblemSpec, x: &ProductPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lambdas = Vec::with_capacity(spec.order());
    let mut spreads = Vec::with_capacity(spec.order());
    for i in 0..spec.order() {
        let g = spec.exponents.gamma(i);
        let ratios: Vec<f64> = mode_operator_logs(spec, i, x)?
            .iter()
            .zip(x.factor(i).logs())
            .map(|(lf, lx)| lf - g * lx)
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            });
        lambdas.push(libm::exp(mean));
        spreads.push(libm::expm1(hi - lo));
    }
    Ok((lambdas, spreads))
}

/// Solution with a single scaling coefficient shared by every factor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GlobalSolution {
    pub lambda: f64,
    pub result: SolveResult,
}

/// Solves `f_i(u) = lambda u_i^gamma_i` with one common `lambda`, for
/// column-constant exponents `alpha_ij = alpha_j`. Factor `i` is normalized
/// by the weighted power mean of exponent `alpha_i + gamma_i`.
pub fn global_lambda_solve(spec: &ProblemSpec, opts: &SolveOptions) -> Result<GlobalSolution> {
    let alphas = spec.exponents.column_constant().ok_or(Error::Precondition(
        "alpha must be constant along each column",
    ))?;
    spec.exponents.check_gamma()?;
    let mut normalizations = Vec::with_capacity(spec.order());
    for (i, a) in alphas.iter().enumerate() {
        let r = a + spec.exponents.gamma(i);
        if r == 0.0 {
            return Err(Error::Precondition("alpha_i + gamma_i must be nonzero"));
        }
        normalizations.push(Normalization::PowerMean(r));
    }
    let spec = ProblemSpec::new(spec.kernel.clone(), spec.exponents.clone(), normalizations)?;
    let result = solve_eigen_system(&spec, opts, None)?;
    let lambda = libm::exp(
        result.lambdas.iter().map(|l| libm::log(*l)).sum::<f64>() / result.lambdas.len() as f64,
    );
    Ok(GlobalSolution { lambda, result })
}

/// Result of [`tensor_norm`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TensorNorm {
    /// `sum H(i_1..i_nu) x*_1(i_1) ... x*_nu(i_nu)` at the positive solution.
    pub value: f64,
    /// `n^(nu/2) sin(pi/n)` when every `p_i = 2` and `n >= 2`.
    pub bound: Option<f64>,
    pub result: SolveResult,
}

/// The Hilbert-type upper bound `n^(nu/2) sin(pi/n)` on the
/// `(2, ..., 2)`-norm; `None` for `n < 2` where it degenerates.
pub fn hilbert_norm_bound(nu: usize, n: usize) -> Option<f64> {
    (n >= 2)
        .then(|| libm::pow(n as f64, nu as f64 / 2.0) * libm::sin(core::f64::consts::PI / n as f64))
}

/// `||H||_{p_1..p_nu}` for the Hilbert tensor, from the positive critical
/// point of the multilinear form on the product of `p_i`-spheres:
/// `f_i(x) = lambda_i x_i^(p_i - 1)` with unit `alpha` and `p_i`-norm slices.
pub fn tensor_norm(nu: usize, n: usize, p: &[f64], opts: &SolveOptions) -> Result<TensorNorm> {
    if p.len() != nu {
        return Err(Error::Dimension {
            expected: nu,
            found: p.len(),
        });
    }
    if p.iter().any(|&q| !(q > 1.0 && q.is_finite())) {
        return Err(Error::Precondition(
            "every p_i must be finite and greater than 1",
        ));
    }
    let kernel = hilbert_tensor(nu, n)?;
    let alpha: Vec<Vec<f64>> = (0..nu)
        .map(|i| (0..nu).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect();
    let exponents = ExponentSpec::new(&alpha, p.iter().map(|q| q - 1.0).collect())?;
    let spec = ProblemSpec::new(
        kernel,
        exponents,
        p.iter().map(|&q| Normalization::PNorm(q)).collect(),
    )?;
    let result = solve_eigen_system(&spec, opts, None)?;
    let value = multilinear_form(&spec, &result.x_star)?;
    let bound = if p.iter().all(|&q| q == 2.0) {
        hilbert_norm_bound(nu, n)
    } else {
        None
    };
    if let Some(b) = bound {
        if value > b * (1.0 + 1e-12) {
            return Err(Error::BoundViolated {
                norm: value,
                bound: b,
            });
        }
    }
    Ok(TensorNorm {
        value,
        bound,
        result,
    })
}

/// `sum_xi K(xi) eta(xi) prod_k x_k(xi_k)` for a spec with unit `alpha`.
fn multilinear_form(spec: &ProblemSpec, x: &ProductPoint) -> Result<f64> {
    let f0: PositiveVector = mode_operator(spec, 0, x)?;
    Ok(f0
        .as_slice()
        .iter()
        .zip(x.factor(0).as_slice())
        .zip(spec.kernel.weights(0))
        .map(|((f, v), w)| f * v * w)
        .sum())
}
