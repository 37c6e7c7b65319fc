//! Positive kernels on finite grids and the integral operators they define.
//!
//! For a kernel `K` on `X_1 x ... x X_nu` with quadrature weights `eta_j`,
//! mode `i` of the operator is
//!
//! ```text
//! f_i(x)(s) = sum_{xi : xi_i = s} K(xi) prod_{j != i} x_j(xi_j)^alpha_ij eta_j(xi_j)
//! ```
//!
//! and never reads `x_i`. Its mode-`j` contraction ratio is bounded by
//! `tanh(log(Delta_j(K)) / 4)`, where `Delta_j` is the largest cross-ratio
//! obtained by swapping coordinate `j` between two grid points.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::cone::{
    log_spread, normalize, Normalization, PositiveVector, ProductPoint, POSITIVITY_FLOOR,
};
use crate::contraction::{birkhoff_ratio, NonnegMatrix, ProductMap};
use crate::error::{Error, Result};

/// Default limit on the number of kernel entries for [`cross_ratio_brute`].
pub const DEFAULT_CROSS_RATIO_CAP: usize = 10_000;

/// Direct (non-log) evaluation is trusted only inside this range.
const SAFE_LO: f64 = 1e-280;
const SAFE_HI: f64 = 1e280;

/// Known closed-form structure of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelStructure {
    General,
    /// `H(i_1, ..., i_nu) = 1 / (i_1 + ... + i_nu - nu + 1)` on `{1..n}^nu`.
    Hilbert {
        order: usize,
        size: usize,
    },
}

/// Dense strictly positive `nu`-mode kernel, row-major in mode order, with
/// positive quadrature weights per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseKernel {
    dims: Vec<usize>,
    values: Vec<f64>,
    weights: Vec<Vec<f64>>,
    structure: KernelStructure,
}

fn check_positive(values: &[f64]) -> Result<()> {
    match values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= POSITIVITY_FLOOR))
    {
        Some((index, &value)) => Err(Error::NotPositive { index, value }),
        None => Ok(()),
    }
}

impl DenseKernel {
    /// Builds a kernel; `weights` default to one on every mode.
    pub fn new(dims: Vec<usize>, values: Vec<f64>, weights: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Empty);
        }
        let total: usize = dims.iter().product();
        if values.len() != total {
            return Err(Error::Dimension {
                expected: total,
                found: values.len(),
            });
        }
        check_positive(&values)?;
        let weights = match weights {
            Some(w) => {
                if w.len() != dims.len() {
                    return Err(Error::Dimension {
                        expected: dims.len(),
                        found: w.len(),
                    });
                }
                for (wj, &nj) in w.iter().zip(&dims) {
                    if wj.len() != nj {
                        return Err(Error::Dimension {
                            expected: nj,
                            found: wj.len(),
                        });
                    }
                    check_positive(wj)?;
                }
                w
            }
            None => dims.iter().map(|&n| vec![1.0; n]).collect(),
        };
        Ok(Self {
            dims,
            values,
            weights,
            structure: KernelStructure::General,
        })
    }

    /// Kernel with entries `f(index)` for every multi-index (0-based).
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let total: usize = dims.iter().product();
        let mut idx = vec![0usize; dims.len()];
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(f(&idx));
            for m in (0..dims.len()).rev() {
                idx[m] += 1;
                if idx[m] < dims[m] {
                    break;
                }
                idx[m] = 0;
            }
        }
        Self::new(dims, values, None)
    }

    /// Rank-one kernel `K(xi) = prod_k a_k(xi_k)`.
    pub fn rank_one(factors: &[Vec<f64>]) -> Result<Self> {
        let dims = factors.iter().map(Vec::len).collect();
        Self::from_fn(dims, |idx| {
            idx.iter()
                .enumerate()
                .map(|(k, &s)| factors[k][s])
                .product()
        })
    }

    pub fn with_weights(self, weights: Vec<Vec<f64>>) -> Result<Self> {
        let structure = self.structure;
        let mut k = Self::new(self.dims, self.values, Some(weights))?;
        k.structure = structure;
        Ok(k)
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self, mode: usize) -> &[f64] {
        &self.weights[mode]
    }

    pub fn structure(&self) -> KernelStructure {
        self.structure
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let off = idx
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + i);
        self.values[off]
    }

    fn check_mode(&self, j: usize) -> Result<()> {
        if j >= self.order() {
            return Err(Error::ModeIndex {
                index: j,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// `Delta_j(K)`: the closed form for Hilbert tensors, otherwise the
    /// brute-force scan limited to `cap` entries.
    pub fn cross_ratio(&self, j: usize, cap: usize) -> Result<f64> {
        self.check_mode(j)?;
        match self.structure {
            KernelStructure::Hilbert { order, size } => hilbert_cross_ratio(order, size),
            KernelStructure::General => cross_ratio_capped(self, j, cap),
        }
    }
}

/// Exponents `alpha_ij` (row `i` = operator `f_i`) and `gamma_i` of the
/// system `f_i(x) = lambda_i x_i^gamma_i`. The diagonal of `alpha` is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSpec {
    nu: usize,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
}

impl ExponentSpec {
    pub fn new<R: AsRef<[f64]>>(alpha: &[R], gamma: Vec<f64>) -> Result<Self> {
        let nu = gamma.len();
        if alpha.len() != nu {
            return Err(Error::Dimension {
                expected: nu,
                found: alpha.len(),
            });
        }
        let mut flat = Vec::with_capacity(nu * nu);
        for row in alpha {
            let row = row.as_ref();
            if row.len() != nu {
                return Err(Error::Dimension {
                    expected: nu,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        if flat.iter().chain(&gamma).any(|v| !v.is_finite()) {
            return Err(Error::Domain("exponents must be finite"));
        }
        Ok(Self {
            nu,
            alpha: flat,
            gamma,
        })
    }

    /// Every off-diagonal `alpha_ij` equal to `alpha`, every `gamma_i` equal
    /// to `gamma`.
    pub fn uniform(nu: usize, alpha: f64, gamma: f64) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..nu)
            .map(|i| (0..nu).map(|j| if i == j { 0.0 } else { alpha }).collect())
            .collect();
        Self::new(&rows, vec![gamma; nu])
    }

    pub fn order(&self) -> usize {
        self.nu
    }

    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.alpha[i * self.nu + j]
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.gamma[i]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }

    /// Fails with [`Error::InvalidExponent`] on the first zero `gamma_i`.
    pub fn check_gamma(&self) -> Result<()> {
        match self.gamma.iter().position(|&g| g == 0.0) {
            Some(index) => Err(Error::InvalidExponent { index, value: 0.0 }),
            None => Ok(()),
        }
    }

    /// `alpha_j` when `alpha_ij = alpha_j` for every `i != j`.
    pub fn column_constant(&self) -> Option<Vec<f64>> {
        let nu = self.nu;
        let mut cols = Vec::with_capacity(nu);
        for j in 0..nu {
            let mut off = (0..nu).filter(|&i| i != j).map(|i| self.alpha(i, j));
            let first = off.next().unwrap_or(0.0);
            if off.any(|a| a != first) {
                return None;
            }
            cols.push(first);
        }
        Some(cols)
    }
}

/// Kernel, exponents and one normalization per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kernel: DenseKernel,
    pub exponents: ExponentSpec,
    pub normalizations: Vec<Normalization>,
}

impl ProblemSpec {
    pub fn new(
        kernel: DenseKernel,
        exponents: ExponentSpec,
        normalizations: Vec<Normalization>,
    ) -> Result<Self> {
        let nu = kernel.order();
        if exponents.order() != nu {
            return Err(Error::Dimension {
                expected: nu,
                found: exponents.order(),
            });
        }
        if normalizations.len() != nu {
            return Err(Error::Dimension {
                expected: nu,
                found: normalizations.len(),
            });
        }
        for n in &normalizations {
            n.validate()?;
        }
        Ok(Self {
            kernel,
            exponents,
            normalizations,
        })
    }

    /// Sup-norm normalization on every factor.
    pub fn with_sup_norm(kernel: DenseKernel, exponents: ExponentSpec) -> Result<Self> {
        let nu = kernel.order();
        Self::new(kernel, exponents, vec![Normalization::Sup; nu])
    }

    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    pub fn dims(&self) -> &[usize] {
        self.kernel.dims()
    }

    /// `Delta_j(K)` for every mode.
    pub fn cross_ratios(&self, cap: usize) -> Result<Vec<f64>> {
        (0..self.order())
            .map(|j| self.kernel.cross_ratio(j, cap))
            .collect()
    }

    /// Normalizes factor `i` onto its unit slice, using the kernel weights.
    pub fn normalize_factor(&self, i: usize, v: &PositiveVector) -> Result<PositiveVector> {
        normalize(v, &self.normalizations[i], Some(self.kernel.weights(i)))
    }

    /// The map `x -> (f_1(x), ..., f_nu(x))`.
    pub fn operator(&self) -> IntegralOperator<'_> {
        IntegralOperator {
            spec: self,
            scaled: false,
        }
    }

    /// The map `x -> (f_1(x)^(1/gamma_1), ..., f_nu(x)^(1/gamma_nu))`.
    pub fn scaled_operator(&self) -> IntegralOperator<'_> {
        IntegralOperator {
            spec: self,
            scaled: true,
        }
    }
}

/// Borrowed view of a problem's operator as a [`ProductMap`].
#[derive(Debug, Clone, Copy)]
pub struct IntegralOperator<'a> {
    spec: &'a ProblemSpec,
    scaled: bool,
}

impl ProductMap for IntegralOperator<'_> {
    fn dims(&self) -> Vec<usize> {
        self.spec.dims().to_vec()
    }

    fn apply(&self, x: &ProductPoint) -> Result<ProductPoint> {
        let op = if self.scaled {
            scaled_operator
        } else {
            mode_operator
        };
        ProductPoint::new(
            (0..self.spec.order())
                .map(|i| op(self.spec, i, x))
                .collect::<Result<_>>()?,
        )
    }
}

/// Contracts mode `pos` of a row-major tensor with shape `shape` against `g`.
fn contract_mode(t: &[f64], shape: &[usize], pos: usize, g: &[f64], log: bool) -> Vec<f64> {
    let outer: usize = shape[..pos].iter().product();
    let n = shape[pos];
    let inner: usize = shape[pos + 1..].iter().product();
    let mut out = vec![if log { f64::NEG_INFINITY } else { 0.0 }; outer * inner];
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        if log {
            for s in 0..n {
                let src = &t[(o * n + s) * inner..(o * n + s + 1) * inner];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = d.max(v + g[s]);
                }
            }
            let maxes = dst.to_vec();
            for (r, d) in dst.iter_mut().enumerate() {
                let m = maxes[r];
                let sum: f64 = (0..n)
                    .map(|s| libm::exp(t[(o * n + s) * inner + r] + g[s] - m))
                    .sum();
                *d = m + libm::log(sum);
            }
        } else {
            for s in 0..n {
                let src = &t[(o * n + s) * inner..(o * n + s + 1) * inner];
                let gs = g[s];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d += v * gs;
                }
            }
        }
    }
    out
}

/// Contracts every mode except `keep` against the per-mode vectors.
fn contract_all_but(
    values: Vec<f64>,
    dims: &[usize],
    keep: usize,
    g: &[Vec<f64>],
    log: bool,
) -> Vec<f64> {
    let mut t = values;
    let mut shape = dims.to_vec();
    for m in (0..dims.len()).rev() {
        if m == keep {
            continue;
        }
        t = contract_mode(&t, &shape, m, &g[m], log);
        shape.remove(m);
    }
    t
}

fn check_point(spec: &ProblemSpec, i: usize, x: &ProductPoint) -> Result<()> {
    spec.kernel.check_mode(i)?;
    x.check_signature(spec.dims())
}

/// Natural log of `f_i(x)`; falls back to log-sum-exp evaluation when the
/// direct sum leaves the safe floating-point range.
pub(crate) fn mode_operator_logs(
    spec: &ProblemSpec,
    i: usize,
    x: &ProductPoint,
) -> Result<Vec<f64>> {
    check_point(spec, i, x)?;
    let k = &spec.kernel;
    let nu = k.order();
    let direct: Vec<Vec<f64>> = (0..nu)
        .map(|j| {
            if j == i {
                return Vec::new();
            }
            let a = spec.exponents.alpha(i, j);
            x.factor(j)
                .as_slice()
                .iter()
                .zip(k.weights(j))
                .map(|(&v, &w)| libm::pow(v, a) * w)
                .collect()
        })
        .collect();
    let safe = |v: &f64| v.is_finite() && *v >= SAFE_LO && *v <= SAFE_HI;
    if direct.iter().all(|g| g.iter().all(safe)) {
        let out = contract_all_but(k.values.clone(), &k.dims, i, &direct, false);
        if out.iter().all(safe) {
            return Ok(out.iter().map(|&v| libm::log(v)).collect());
        }
    }
    let logs: Vec<Vec<f64>> = (0..nu)
        .map(|j| {
            if j == i {
                return Vec::new();
            }
            let a = spec.exponents.alpha(i, j);
            x.factor(j)
                .logs()
                .iter()
                .zip(k.weights(j))
                .map(|(&l, &w)| a * l + libm::log(w))
                .collect()
        })
        .collect();
    let log_k = k.values.iter().map(|&v| libm::log(v)).collect();
    let out = contract_all_but(log_k, &k.dims, i, &logs, true);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Overflow)
    }
}

fn exp_positive(logs: impl Iterator<Item = f64>) -> Result<PositiveVector> {
    PositiveVector::new(logs.map(libm::exp).collect()).map_err(|_| Error::Overflow)
}

/// `f_i(x)`: the integral operator of mode `i` evaluated at `x`.
pub fn mode_operator(spec: &ProblemSpec, i: usize, x: &ProductPoint) -> Result<PositiveVector> {
    exp_positive(mode_operator_logs(spec, i, x)?.into_iter())
}

/// `f_i(x)^(1/gamma_i)`.
pub fn scaled_operator(spec: &ProblemSpec, i: usize, x: &ProductPoint) -> Result<PositiveVector> {
    let g = gamma_checked(spec, i)?;
    exp_positive(mode_operator_logs(spec, i, x)?.into_iter().map(|l| l / g))
}

fn gamma_checked(spec: &ProblemSpec, i: usize) -> Result<f64> {
    spec.kernel.check_mode(i)?;
    let g = spec.exponents.gamma(i);
    if g == 0.0 {
        return Err(Error::InvalidExponent { index: i, value: g });
    }
    Ok(g)
}

/// `f_i(x)^(1/gamma_i)` rescaled onto the unit slice of factor `i`. Works in
/// log domain throughout, so only the normalized result must be representable.
pub(crate) fn normalized_scaled_operator(
    spec: &ProblemSpec,
    i: usize,
    x: &ProductPoint,
) -> Result<PositiveVector> {
    let g = gamma_checked(spec, i)?;
    let logs: Vec<f64> = mode_operator_logs(spec, i, x)?
        .into_iter()
        .map(|l| l / g)
        .collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v = exp_positive(logs.iter().map(|l| l - shift))?;
    spec.normalize_factor(i, &v)
}

/// Log-kernel values gathered into mode-`j` fibers: row `a` holds
/// `log K(a, s)` for `s` over mode `j`, where `a` ranges over the
/// multi-indices of the remaining modes.
#[derive(Debug, Clone)]
pub struct FiberTable {
    rows: usize,
    cols: usize,
    logs: Vec<f64>,
}

impl FiberTable {
    pub fn new(kernel: &DenseKernel, j: usize) -> Result<Self> {
        kernel.check_mode(j)?;
        let dims = kernel.dims();
        let outer: usize = dims[..j].iter().product();
        let cols = dims[j];
        let inner: usize = dims[j + 1..].iter().product();
        let rows = outer * inner;
        let mut logs = vec![0.0; rows * cols];
        for o in 0..outer {
            for s in 0..cols {
                for r in 0..inner {
                    let a = o * inner + r;
                    logs[a * cols + s] = libm::log(kernel.values[(o * cols + s) * inner + r]);
                }
            }
        }
        Ok(Self { rows, cols, logs })
    }

    /// Number of fibers.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    fn fiber(&self, a: usize) -> &[f64] {
        &self.logs[a * self.cols..(a + 1) * self.cols]
    }

    /// Largest log cross-ratio over fiber pairs `(a, b)` with `a` in `rows`
    /// and `b > a`. For a fixed pair the best `(s, t)` is the Hilbert
    /// distance between the two fibers. Returns 0 for an empty range.
    pub fn max_log_ratio(&self, rows: Range<usize>) -> f64 {
        let mut best: f64 = 0.0;
        for a in rows {
            let fa = self.fiber(a);
            for b in a + 1..self.rows {
                let fb = self.fiber(b);
                best = best.max(log_spread(fa.iter().zip(fb).map(|(x, y)| x - y)));
            }
        }
        best
    }
}

/// `Delta_j(K)` by exhaustive scan, refusing kernels above
/// [`DEFAULT_CROSS_RATIO_CAP`] entries.
pub fn cross_ratio_brute(kernel: &DenseKernel, j: usize) -> Result<f64> {
    cross_ratio_capped(kernel, j, DEFAULT_CROSS_RATIO_CAP)
}

/// `Delta_j(K)` by exhaustive scan with an explicit entry cap.
pub fn cross_ratio_capped(kernel: &DenseKernel, j: usize, cap: usize) -> Result<f64> {
    if kernel.len() > cap {
        return Err(Error::TooLarge {
            entries: kernel.len(),
            cap,
        });
    }
    let table = FiberTable::new(kernel, j)?;
    Ok(libm::exp(table.max_log_ratio(0..table.len())))
}

/// Hilbert tensor of order `nu` and size `n`, unit weights.
pub fn hilbert_tensor(nu: usize, n: usize) -> Result<DenseKernel> {
    if nu < 2 || n < 1 {
        return Err(Error::Precondition(
            "Hilbert tensor needs order >= 2 and size >= 1",
        ));
    }
    let mut k = DenseKernel::from_fn(vec![n; nu], |idx| {
        1.0 / (idx.iter().sum::<usize>() + 1) as f64
    })?;
    k.structure = KernelStructure::Hilbert { order: nu, size: n };
    Ok(k)
}

/// Closed form `Delta(H) = (n^2 (nu-1) + n (2-nu)) / (n nu - nu + 1)`,
/// identical for every mode.
pub fn hilbert_cross_ratio(nu: usize, n: usize) -> Result<f64> {
    if nu < 2 || n < 1 {
        return Err(Error::Precondition(
            "Hilbert tensor needs order >= 2 and size >= 1",
        ));
    }
    let (nu, n) = (nu as f64, n as f64);
    Ok((n * n * (nu - 1.0) + n * (2.0 - nu)) / (n * nu - nu + 1.0))
}

/// Lipschitz matrices of the operator family:
/// `A_ij = |alpha_ij| tanh(log(Delta_j) / 4)` off the diagonal, `A_ii = 0`,
/// and `B = diag(1 / |gamma_i|) A` for the scaled maps `f_i^(1/gamma_i)`.
pub fn lipschitz_matrices(spec: &ProblemSpec) -> Result<(NonnegMatrix, NonnegMatrix)> {
    lipschitz_matrices_from(spec, &spec.cross_ratios(DEFAULT_CROSS_RATIO_CAP)?)
}

/// [`lipschitz_matrices`] with precomputed cross-ratios `Delta_j`.
pub fn lipschitz_matrices_from(
    spec: &ProblemSpec,
    cross_ratios: &[f64],
) -> Result<(NonnegMatrix, NonnegMatrix)> {
    let nu = spec.order();
    if cross_ratios.len() != nu {
        return Err(Error::Dimension {
            expected: nu,
            found: cross_ratios.len(),
        });
    }
    spec.exponents.check_gamma()?;
    let ratios = cross_ratios
        .iter()
        .map(|&d| {
            if d.is_nan() || d < 1.0 {
                return Err(Error::Domain("kernel cross-ratio must be at least 1"));
            }
            birkhoff_ratio(libm::log(d))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut a = vec![0.0; nu * nu];
    for i in 0..nu {
        for j in 0..nu {
            if i != j {
                a[i * nu + j] = libm::fabs(spec.exponents.alpha(i, j)) * ratios[j];
            }
        }
    }
    let a = NonnegMatrix::new(nu, a)?;
    let inv_gamma: Vec<f64> = spec
        .exponents
        .gammas()
        .iter()
        .map(|g| 1.0 / libm::fabs(*g))
        .collect();
    let b = a.scale_rows(&inv_gamma)?;
    Ok((a, b))
}
