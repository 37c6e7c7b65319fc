//! Birkhoff contraction ratios, Lipschitz matrices and the error bounds
//! they certify.
//!
//! A nonnegative `nu x nu` matrix `A` is a Lipschitz matrix for a self-map
//! `f` of a product of metric spaces when
//! `delta(f(x), f(y)) <= A delta(x, y)` componentwise. If `rho(A) < 1`, the
//! iteration `x <- f(x)` converges to the unique fixed point and
//! `delta(f^n(x), x*) <= (I - A)^-1 A^n delta(f(x), x)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::{hilbert_distance, log_spread, MetricVector, PositiveVector, ProductPoint};
use crate::error::{Error, Result};
use crate::linalg;

/// `rho(B)` must fall below `1 - CERTIFICATION_MARGIN` for a certificate.
pub const CERTIFICATION_MARGIN: f64 = 1e-9;

/// Number of repeated squarings used by [`spectral_radius`] and
/// [`left_perron_vector`]; the effective power is `2^SQUARINGS`.
const SQUARINGS: u32 = 60;

/// Entries of a left Perron vector at or below this are treated as zero.
const ZERO_WEIGHT: f64 = 1e-14;

/// Square, entrywise nonnegative matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: entries.len(),
            });
        }
        if let Some((index, &value)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Negative { index, value });
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::new(n, entries)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n.max(1))
    }

    /// Maximum row sum, the norm induced by the sup-norm.
    pub fn max_row_sum(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_col_sum(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `A x` for a vector of length `dim()`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        linalg::matvec(&self.entries, x, self.n)
    }

    /// `w A` for a row vector of length `dim()`.
    pub fn apply_left(&self, w: &[f64]) -> Vec<f64> {
        linalg::vecmat(w, &self.entries, self.n)
    }

    /// Scales row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, v)| v * factors[k / self.n.max(1)])
            .collect();
        Self::new(self.n, entries)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for NonnegMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.rows())
    }
}

/// Projective diameter of the image of the positive orthant under a
/// positive matrix `F`:
/// `max_{i,j,k,l} log(F_ij F_kl / (F_il F_kj))`.
///
/// The image cone is spanned by the columns of `F`, so this equals the
/// largest Hilbert distance between two columns.
pub fn linear_diameter<R: AsRef<[f64]>>(rows: &[R]) -> Result<f64> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::Empty);
    }
    let n = rows[0].as_ref().len();
    let mut logs = Vec::with_capacity(m * n);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: r.len(),
            });
        }
        for (k, &v) in r.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NotPositive {
                    index: i * n + k,
                    value: v,
                });
            }
            logs.push(libm::log(v));
        }
    }
    let mut diam: f64 = 0.0;
    for j in 0..n {
        for l in j + 1..n {
            diam = diam.max(log_spread(
                (0..m).map(|i| logs[i * n + j] - logs[i * n + l]),
            ));
        }
    }
    Ok(diam)
}

/// Birkhoff contraction ratio `tanh(diam / 4)`, with `tanh(inf) = 1`.
pub fn birkhoff_ratio(diam: f64) -> Result<f64> {
    if diam.is_nan() || diam < 0.0 {
        return Err(Error::Domain("projective diameter must be nonnegative"));
    }
    if diam == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(libm::tanh(diam / 4.0))
}

/// Spectral radius of a nonnegative matrix from Gelfand's formula,
/// `rho = lim ||A^k||^(1/k)`, along `k = 2^m` by repeated squaring with
/// log-scale renormalization. Products of nonnegative matrices involve no
/// cancellation, so the log-norm error stays near machine precision.
pub fn spectral_radius(a: &NonnegMatrix) -> f64 {
    let n = a.n;
    if n == 0 {
        return 0.0;
    }
    let mut b = a.entries.clone();
    let s: f64 = b.iter().sum();
    if s == 0.0 {
        return 0.0;
    }
    b.iter_mut().for_each(|v| *v /= s);
    let mut log_norm = libm::log(s);
    let mut power = 1.0_f64;
    for _ in 0..SQUARINGS {
        b = linalg::matmul(&b, &b, n);
        let s: f64 = b.iter().sum();
        if s == 0.0 {
            return 0.0;
        }
        b.iter_mut().for_each(|v| *v /= s);
        log_norm = 2.0 * log_norm + libm::log(s);
        power *= 2.0;
    }
    libm::exp(log_norm / power)
}

/// Nonnegative left eigenvector `w A = rho(A) w`, scaled to `max w = 1`.
///
/// Powers of `(I + A) / (1 + rho)` converge to the spectral projector of
/// `rho`, since `rho` is the only eigenvalue of `A` with `|1 + lambda| = 1 + rho`.
/// The column sums of that limit form a left eigenvector. When `rho` is
/// repeated every left eigenvector is summed (identity gives `(1, ..., 1)`).
pub fn left_perron_vector(a: &NonnegMatrix) -> Result<Vec<f64>> {
    let n = a.n;
    if spectral_radius(a) == 0.0 {
        return Err(Error::ZeroSpectralRadius);
    }
    let mut b = a.entries.clone();
    for i in 0..n {
        b[i * n + i] += 1.0;
    }
    for _ in 0..SQUARINGS {
        let s: f64 = b.iter().sum();
        b.iter_mut().for_each(|v| *v /= s);
        b = linalg::matmul(&b, &b, n);
    }
    let mut w: Vec<f64> = (0..n).map(|j| (0..n).map(|i| b[i * n + j]).sum()).collect();
    let m = w.iter().copied().fold(0.0, f64::max);
    w.iter_mut().for_each(|v| *v /= m);
    Ok(w)
}

fn require_contraction(a: &NonnegMatrix) -> Result<f64> {
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(Error::NoCertificate { rho });
    }
    Ok(rho)
}

/// A priori error bound `(I - A)^-1 A^n d1` of the fixed-point iteration,
/// where `d1 = delta(f(x), x)` and the bound applies to `delta(f^n(x), x*)`.
pub fn apriori_bound(a: &NonnegMatrix, d1: &MetricVector, n: u64) -> Result<MetricVector> {
    let dim = a.n;
    if d1.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: d1.len(),
        });
    }
    let rho = require_contraction(a)?;
    let mut v = d1.as_slice().to_vec();
    for _ in 0..n {
        v = a.apply(&v);
        if v.iter().all(|&x| x == 0.0) {
            break;
        }
    }
    let y = linalg::solve(&linalg::identity_minus(&a.entries, dim), &v, dim)
        .ok_or(Error::NoCertificate { rho })?;
    // (I - A)^-1 is entrywise nonnegative; clip round-off.
    MetricVector::new(y.into_iter().map(|x| x.max(0.0)).collect())
}

/// Outcome of a contraction analysis for a problem: Lipschitz matrix `A`,
/// the matrix `B` that governs the iterated map, `rho(B)` and a left Perron
/// vector `w` of `B`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ContractionCertificate {
    #[cfg_attr(feature = "serde", serde(rename = "A"))]
    pub a: NonnegMatrix,
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    pub b: NonnegMatrix,
    pub rho_b: f64,
    /// All zeros when `rho_b == 0`.
    pub w: Vec<f64>,
    pub certified: bool,
    pub margin: f64,
}

impl ContractionCertificate {
    pub fn new(a: NonnegMatrix, b: NonnegMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        let rho_b = spectral_radius(&b);
        let w = if rho_b > 0.0 {
            left_perron_vector(&b)?
        } else {
            vec![0.0; b.dim()]
        };
        Ok(Self {
            a,
            b,
            rho_b,
            w,
            certified: rho_b < 1.0 - CERTIFICATION_MARGIN,
            margin: CERTIFICATION_MARGIN,
        })
    }

    /// Certificate for a map whose Lipschitz matrix is used directly.
    pub fn from_lipschitz(a: NonnegMatrix) -> Result<Self> {
        Self::new(a.clone(), a)
    }

    pub fn order(&self) -> usize {
        self.b.dim()
    }

    /// Indices `i` with `w_i = 0`, for which the Perron-vector rate bound
    /// carries no information.
    pub fn zero_weight_factors(&self) -> Vec<usize> {
        self.w
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= ZERO_WEIGHT)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-factor convergence-rate bound on `d_i(x^(n+1)_i, x*_i)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RateBound {
    pub bounds: Vec<f64>,
    /// True when `w` has zero entries and the binomial envelope was used.
    pub binomial: bool,
    /// Factors with `w_i = 0`; empty for the Perron bound.
    pub affected: Vec<usize>,
}

/// `C(n, k)` as a float.
fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// The envelope `c * C(n, nu - 1) * rho^(n - nu + 1)`, meaningful for `n >= nu`
/// (infinite below).
pub fn binomial_envelope(constant: f64, nu: usize, n: u64, rho: f64) -> f64 {
    let nu = nu as u64;
    if n < nu {
        return f64::INFINITY;
    }
    constant * binomial(n, nu - 1) * libm::pow(rho, (n + 1 - nu) as f64)
}

/// Convergence-rate bound for the normalized power sequence.
///
/// With `gamma = (1 - rho)^-1 sum_i w_i d10_i`, each factor with `w_i > 0`
/// gets `gamma rho^n / w_i`. If any `w_i` vanishes, every factor gets the
/// binomial envelope `fallback * C(n, nu-1) rho^(n-nu+1)` instead.
pub fn rate_bound(
    cert: &ContractionCertificate,
    d10: &MetricVector,
    n: u64,
    fallback: f64,
) -> Result<RateBound> {
    let nu = cert.order();
    if d10.len() != nu {
        return Err(Error::Dimension {
            expected: nu,
            found: d10.len(),
        });
    }
    let rho = cert.rho_b;
    if rho >= 1.0 {
        return Err(Error::NoCertificate { rho });
    }
    let affected = cert.zero_weight_factors();
    if !affected.is_empty() {
        let b = binomial_envelope(fallback, nu, n, rho);
        return Ok(RateBound {
            bounds: vec![b; nu],
            binomial: true,
            affected,
        });
    }
    let gamma = cert
        .w
        .iter()
        .zip(d10.as_slice())
        .map(|(w, d)| w * d)
        .sum::<f64>()
        / (1.0 - rho);
    let decay = gamma * libm::pow(rho, n as f64);
    Ok(RateBound {
        bounds: cert.w.iter().map(|w| decay / w).collect(),
        binomial: false,
        affected,
    })
}

/// A self-map of a product of positive cones.
pub trait ProductMap {
    /// Per-factor dimensions of the domain (and codomain).
    fn dims(&self) -> Vec<usize>;

    fn apply(&self, x: &ProductPoint) -> Result<ProductPoint>;
}

impl<F> ProductMap for (Vec<usize>, F)
where
    F: Fn(&ProductPoint) -> Result<ProductPoint>,
{
    fn dims(&self) -> Vec<usize> {
        self.0.clone()
    }

    fn apply(&self, x: &ProductPoint) -> Result<ProductPoint> {
        (self.1)(x)
    }
}

/// Result of [`lipschitz_sample_check`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SampleReport {
    pub trials: usize,
    /// `max_{pairs, i} (delta(f(x), f(y)) - A delta(x, y))_i`; nonpositive
    /// when no violation was seen.
    pub max_violation: f64,
    /// Entry `(i, j)`: largest observed `d(f(x)_i, f(y)_i) / d(x_j, y_j)` over
    /// pairs differing only in factor `j`. A lower bound on the mode-`j`
    /// contraction ratio of `f_i`.
    pub observed: NonnegMatrix,
}

const SAMPLE_LOG_RANGE: f64 = 6.907_755_278_982_137; // ln 1e3

fn random_factor(rng: &mut ChaCha8Rng, n: usize) -> Result<PositiveVector> {
    PositiveVector::new(
        (0..n)
            .map(|_| libm::exp(rng.gen_range(-SAMPLE_LOG_RANGE..=SAMPLE_LOG_RANGE)))
            .collect(),
    )
}

fn random_point(rng: &mut ChaCha8Rng, dims: &[usize]) -> Result<ProductPoint> {
    ProductPoint::new(
        dims.iter()
            .map(|&n| random_factor(rng, n))
            .collect::<Result<_>>()?,
    )
}

/// Samples random pairs (entries log-uniform in `[1e-3, 1e3]`) and checks
/// `delta(f(x), f(y)) <= A delta(x, y)`. Each trial also perturbs one factor
/// at a time to record empirical mode ratios.
pub fn lipschitz_sample_check<M: ProductMap + ?Sized>(
    map: &M,
    a: &NonnegMatrix,
    trials: usize,
    seed: u64,
) -> Result<SampleReport> {
    let dims = map.dims();
    let nu = dims.len();
    if a.dim() != nu {
        return Err(Error::Dimension {
            expected: nu,
            found: a.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    let mut observed = vec![0.0; nu * nu];
    for _ in 0..trials {
        let x = random_point(&mut rng, &dims)?;
        let y = random_point(&mut rng, &dims)?;
        let fx = map.apply(&x)?;
        let fy = map.apply(&y)?;
        let lhs = crate::cone::product_distance(&fx, &fy)?;
        let rhs = a.apply(crate::cone::product_distance(&x, &y)?.as_slice());
        for (l, r) in lhs.as_slice().iter().zip(&rhs) {
            max_violation = max_violation.max(l - r);
        }
        for j in 0..nu {
            let mut factors = x.factors().to_vec();
            factors[j] = random_factor(&mut rng, dims[j])?;
            let dj = hilbert_distance(x.factor(j), &factors[j])?;
            if dj == 0.0 {
                continue;
            }
            let fz = map.apply(&ProductPoint::new(factors)?)?;
            for i in 0..nu {
                let r = hilbert_distance(fx.factor(i), fz.factor(i))? / dj;
                observed[i * nu + j] = f64::max(observed[i * nu + j], r);
            }
        }
    }
    Ok(SampleReport {
        trials,
        max_violation: if trials == 0 { 0.0 } else { max_violation },
        observed: NonnegMatrix::new(nu, observed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> NonnegMatrix {
        NonnegMatrix::from_rows(rows).unwrap()
    }

    /// All 4-index cross ratios, enumerated directly.
    fn diameter_by_enumeration(f: &[&[f64]]) -> f64 {
        let (rows, cols) = (f.len(), f[0].len());
        let mut best = f64::NEG_INFINITY;
        for i in 0..rows {
            for k in 0..rows {
                for j in 0..cols {
                    for l in 0..cols {
                        let r = (f[i][j] * f[k][l]) / (f[i][l] * f[k][j]);
                        best = best.max(r.ln());
                    }
                }
            }
        }
        best
    }

    #[test]
    fn linear_diameter_examples() {
        assert_eq!(linear_diameter(&[[1.0, 1.0], [1.0, 1.0]]).unwrap(), 0.0);
        let f: [&[f64]; 2] = [&[2.0, 1.0], &[1.0, 1.0]];
        let oracle = diameter_by_enumeration(&f);
        assert_relative_eq!(oracle, core::f64::consts::LN_2, max_relative = 1e-15);
        assert_relative_eq!(linear_diameter(&f).unwrap(), oracle, max_relative = 1e-15);
        let h: [&[f64]; 2] = [&[1.0, 0.5], &[0.5, 1.0 / 3.0]];
        let oracle = diameter_by_enumeration(&h);
        assert_relative_eq!(oracle, 0.28768207245178085, max_relative = 1e-14);
        assert_relative_eq!(linear_diameter(&h).unwrap(), oracle, max_relative = 1e-14);
    }

    #[test]
    fn linear_diameter_rejects_nonpositive() {
        assert!(matches!(
            linear_diameter(&[[1.0, 0.0], [1.0, 1.0]]),
            Err(Error::NotPositive { .. })
        ));
        assert!(linear_diameter(&[[1.0, -2.0]]).is_err());
    }

    #[test]
    fn birkhoff_ratio_examples() {
        assert_eq!(birkhoff_ratio(0.0).unwrap(), 0.0);
        assert_eq!(birkhoff_ratio(f64::INFINITY).unwrap(), 1.0);
        // (sqrt 2 - 1) / (sqrt 2 + 1)
        assert_relative_eq!(
            birkhoff_ratio(core::f64::consts::LN_2).unwrap(),
            0.171_572_875_253_809_9,
            max_relative = 1e-14
        );
        assert!(birkhoff_ratio(-1e-3).is_err());
        assert!(birkhoff_ratio(f64::NAN).is_err());
    }

    #[test]
    fn spectral_radius_examples() {
        assert_relative_eq!(
            spectral_radius(&m(&[&[0.0, 1.0], &[1.0, 0.0]])),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            spectral_radius(&m(&[&[0.0, 0.5], &[0.5, 0.0]])),
            0.5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            spectral_radius(&m(&[&[0.0, 0.5], &[0.25, 0.0]])),
            0.125f64.sqrt(),
            max_relative = 1e-12
        );
        assert_eq!(spectral_radius(&m(&[&[0.0, 3.0], &[0.0, 0.0]])), 0.0);
        assert_eq!(spectral_radius(&NonnegMatrix::zeros(3)), 0.0);
    }

    #[test]
    fn spectral_radius_handles_jordan_blocks() {
        let a = m(&[&[0.7, 1.0, 0.0], &[0.0, 0.7, 1.0], &[0.0, 0.0, 0.7]]);
        assert_relative_eq!(spectral_radius(&a), 0.7, max_relative = 1e-10);
        let r = m(&[&[0.2, 0.3], &[0.0, 0.5]]);
        assert_relative_eq!(spectral_radius(&r), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn left_perron_examples() {
        let k = 0.37;
        let w = left_perron_vector(&m(&[&[0.0, k], &[k, 0.0]])).unwrap();
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(w[1], 1.0, max_relative = 1e-12);
        let w = left_perron_vector(&NonnegMatrix::identity(2)).unwrap();
        assert_eq!(w, vec![1.0, 1.0]);
        let a = m(&[&[0.0, 0.5], &[0.25, 0.0]]);
        let w = left_perron_vector(&a).unwrap();
        assert_relative_eq!(w[0], core::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-10);
        assert_relative_eq!(w[1], 1.0, max_relative = 1e-12);
        assert!(matches!(
            left_perron_vector(&m(&[&[0.0, 1.0], &[0.0, 0.0]])),
            Err(Error::ZeroSpectralRadius)
        ));
    }

    #[test]
    fn left_perron_reducible_has_zero_entry() {
        let a = m(&[&[0.2, 0.3], &[0.0, 0.5]]);
        let w = left_perron_vector(&a).unwrap();
        assert_eq!(w[0], 0.0);
        assert_eq!(w[1], 1.0);
        let cert = ContractionCertificate::from_lipschitz(a).unwrap();
        assert_eq!(cert.zero_weight_factors(), vec![0]);
    }

    #[test]
    fn apriori_bound_examples() {
        let d1 = MetricVector::new(vec![0.3, 1.7]).unwrap();
        assert_eq!(apriori_bound(&NonnegMatrix::zeros(2), &d1, 0).unwrap(), d1);
        let a = m(&[&[0.0, 0.5], &[0.5, 0.0]]);
        let ones = MetricVector::new(vec![1.0, 1.0]).unwrap();
        let b = apriori_bound(&a, &ones, 1).unwrap();
        assert_relative_eq!(b[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(b[1], 1.0, max_relative = 1e-14);
        let b = apriori_bound(&a, &ones, 3).unwrap();
        assert_relative_eq!(b[0], 0.25, max_relative = 1e-14);
        assert_relative_eq!(b[1], 0.25, max_relative = 1e-14);
        assert!(matches!(
            apriori_bound(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &ones, 1),
            Err(Error::NoCertificate { .. })
        ));
    }

    #[test]
    fn rate_bound_examples() {
        let cert = ContractionCertificate::from_lipschitz(m(&[&[0.0, 0.5], &[0.5, 0.0]])).unwrap();
        assert_relative_eq!(cert.rho_b, 0.5, max_relative = 1e-12);
        assert!(cert.certified);
        let d10 = MetricVector::new(vec![0.5, 0.5]).unwrap();
        let b = rate_bound(&cert, &d10, 0, 1.0).unwrap();
        assert!(!b.binomial);
        assert_relative_eq!(b.bounds[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(b.bounds[1], 2.0, max_relative = 1e-12);
        let b = rate_bound(&cert, &d10, 4, 1.0).unwrap();
        assert_relative_eq!(b.bounds[0], 0.125, max_relative = 1e-12);
        assert_eq!(binomial_envelope(1.0, 2, 2, 0.5), 1.0);
        assert_eq!(binomial_envelope(1.0, 2, 1, 0.5), f64::INFINITY);
    }

    #[test]
    fn rate_bound_falls_back_on_zero_weights() {
        let cert = ContractionCertificate::from_lipschitz(m(&[&[0.2, 0.3], &[0.0, 0.5]])).unwrap();
        let d10 = MetricVector::new(vec![1.0, 1.0]).unwrap();
        let b = rate_bound(&cert, &d10, 2, 1.0).unwrap();
        assert!(b.binomial);
        assert_eq!(b.affected, vec![0]);
        assert_relative_eq!(b.bounds[0], 1.0, max_relative = 1e-12);
        let bad = ContractionCertificate::from_lipschitz(m(&[&[1.5]])).unwrap();
        assert!(!bad.certified);
        assert!(rate_bound(&bad, &MetricVector::zeros(1), 0, 1.0).is_err());
    }

    #[test]
    fn certificate_margin() {
        let near = ContractionCertificate::from_lipschitz(m(&[&[1.0 - 1e-10]])).unwrap();
        assert!(!near.certified);
        let zero = ContractionCertificate::from_lipschitz(NonnegMatrix::zeros(2)).unwrap();
        assert!(zero.certified);
        assert_eq!(zero.w, vec![0.0, 0.0]);
    }

    fn swap_map(f: [[f64; 2]; 2]) -> (Vec<usize>, impl Fn(&ProductPoint) -> Result<ProductPoint>) {
        let apply = move |v: &PositiveVector| {
            PositiveVector::new((0..2).map(|i| f[i][0] * v[0] + f[i][1] * v[1]).collect())
        };
        (vec![2, 2], move |x: &ProductPoint| {
            ProductPoint::new(vec![apply(x.factor(1))?, apply(x.factor(0))?])
        })
    }

    #[test]
    fn all_ones_matrix_is_lipschitz_for_multilinear_map() {
        let map = swap_map([[1.0, 4.0], [0.3, 2.0]]);
        let rep = lipschitz_sample_check(&map, &m(&[&[1.0, 1.0], &[1.0, 1.0]]), 500, 7).unwrap();
        assert!(rep.max_violation <= 1e-10);
    }

    #[test]
    fn swap_map_lipschitz_matrix() {
        let f = [[1.0, 4.0], [0.3, 2.0]];
        let kappa = birkhoff_ratio(linear_diameter(&f).unwrap()).unwrap();
        let a = m(&[&[0.0, kappa], &[kappa, 0.0]]);
        assert_relative_eq!(spectral_radius(&a), kappa, max_relative = 1e-12);
        assert!(kappa < 1.0);
        let rep = lipschitz_sample_check(&swap_map(f), &a, 2000, 11).unwrap();
        assert!(
            rep.max_violation <= 1e-10,
            "violation {}",
            rep.max_violation
        );
        assert!(rep.observed.get(0, 1) <= kappa + 1e-10);
        assert_eq!(rep.observed.get(0, 0), 0.0);
    }

    #[test]
    fn linear_map_observed_ratio_approaches_birkhoff_ratio() {
        let f = [[1.0, 2.0, 0.5], [0.7, 1.0, 3.0], [2.0, 0.2, 1.0]];
        let kappa = birkhoff_ratio(linear_diameter(&f).unwrap()).unwrap();
        let map = (vec![3], move |x: &ProductPoint| {
            let v = x.factor(0);
            ProductPoint::new(vec![PositiveVector::new(
                (0..3)
                    .map(|i| (0..3).map(|j| f[i][j] * v[j]).sum())
                    .collect(),
            )?])
        });
        let a = m(&[&[kappa]]);
        let small = lipschitz_sample_check(&map, &a, 50, 3).unwrap();
        let large = lipschitz_sample_check(&map, &a, 20_000, 3).unwrap();
        assert!(small.max_violation <= 1e-10 && large.max_violation <= 1e-10);
        let (r_small, r_large) = (small.observed.get(0, 0), large.observed.get(0, 0));
        assert!(r_large >= r_small);
        assert!(r_large <= kappa + 1e-12);
        assert!(
            r_large >= 0.9 * kappa,
            "observed {r_large} vs kappa {kappa}"
        );
    }

    fn nonneg(n: usize) -> impl Strategy<Value = NonnegMatrix> {
        proptest::collection::vec(0.0f64..2.0, n * n)
            .prop_map(move |v| NonnegMatrix::new(n, v).unwrap())
    }

    fn positive_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(0.05f64..20.0, c), r)
        })
    }

    proptest! {
        #[test]
        fn spectral_radius_below_induced_norms(a in (1usize..6).prop_flat_map(nonneg)) {
            let rho = spectral_radius(&a);
            prop_assert!(rho <= a.max_row_sum() * (1.0 + 1e-12));
            prop_assert!(rho <= a.max_col_sum() * (1.0 + 1e-12));
        }

        #[test]
        fn left_perron_residual(a in (1usize..6).prop_flat_map(nonneg)) {
            let rho = spectral_radius(&a);
            prop_assume!(rho > 1e-6);
            let w = left_perron_vector(&a).unwrap();
            let wa = a.apply_left(&w);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            prop_assert!((w.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
            for (x, y) in wa.iter().zip(&w) {
                prop_assert!((x - rho * y).abs() <= 1e-8);
            }
        }

        #[test]
        fn diameter_invariant_under_diagonal_scaling(
            rows in positive_rows(),
            seed in proptest::collection::vec(0.1f64..10.0, 8),
        ) {
            let d = linear_diameter(&rows).unwrap();
            let scaled: Vec<Vec<f64>> = rows.iter().enumerate().map(|(i, r)| {
                r.iter().enumerate().map(|(j, v)| v * seed[i % 8] * seed[(j + 3) % 8]).collect()
            }).collect();
            prop_assert!((linear_diameter(&scaled).unwrap() - d).abs() <= 1e-10);
        }

        #[test]
        fn birkhoff_ratio_monotone(a in 0.0f64..60.0, b in 0.0f64..60.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (rl, rh) = (birkhoff_ratio(lo).unwrap(), birkhoff_ratio(hi).unwrap());
            prop_assert!(rl <= rh);
            prop_assert!((0.0..=1.0).contains(&rl) && rh <= 1.0);
            if hi < 40.0 { prop_assert!(rh < 1.0); }
        }

        #[test]
        fn apriori_bound_nonincreasing(
            a in (1usize..5).prop_flat_map(nonneg),
            d in proptest::collection::vec(0.0f64..3.0, 5),
        ) {
            let n = a.dim();
            // row sums below 0.95 keep rho(A) < 1
            let a = a.scale_rows(&vec![0.95 / (2.0 * n as f64); n]).unwrap();
            let d1 = MetricVector::new(d[..n].to_vec()).unwrap();
            let mut prev = apriori_bound(&a, &d1, 0).unwrap();
            for k in 1..6 {
                let next = apriori_bound(&a, &d1, k).unwrap();
                for i in 0..n {
                    prop_assert!(next[i] >= 0.0);
                    prop_assert!(next[i] <= prev[i] + 1e-12 * (1.0 + prev[i]));
                }
                prev = next;
            }
        }
    }
}
