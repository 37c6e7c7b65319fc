//! Hilbert projective metric on the interior of the positive orthant.

use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{Error, Result};

/// Smallest entry accepted by [`PositiveVector::new`].
pub const POSITIVITY_FLOOR: f64 = 1e-300;

/// A strictly positive finite vector: a point in the interior of the
/// positive orthant, i.e. a positive function on a finite grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(transparent))]
pub struct PositiveVector {
    values: Vec<f64>,
}

impl PositiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= POSITIVITY_FLOOR))
        {
            return Err(Error::NotPositive { index, value });
        }
        Ok(Self { values })
    }

    /// The constant function `1` of length `n`.
    pub fn ones(n: usize) -> Result<Self> {
        Self::new(alloc::vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Entrywise natural logarithm.
    pub fn logs(&self) -> Vec<f64> {
        self.values.iter().map(|&v| libm::log(v)).collect()
    }

    /// Multiplies every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect())
    }
}

impl Index<usize> for PositiveVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl TryFrom<Vec<f64>> for PositiveVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// A point `x = (x_1, ..., x_nu)` of a product of positive cones.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(transparent))]
pub struct ProductPoint {
    factors: Vec<PositiveVector>,
}

impl ProductPoint {
    pub fn new(factors: Vec<PositiveVector>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self { factors })
    }

    /// All-ones point with the given per-factor dimensions.
    pub fn ones(dims: &[usize]) -> Result<Self> {
        Self::new(
            dims.iter()
                .map(|&n| PositiveVector::ones(n))
                .collect::<Result<_>>()?,
        )
    }

    /// Number of factors `nu`.
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(PositiveVector::len).collect()
    }

    pub fn factors(&self) -> &[PositiveVector] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &PositiveVector {
        &self.factors[i]
    }

    pub fn into_factors(self) -> Vec<PositiveVector> {
        self.factors
    }

    /// Checks that the per-factor dimensions equal `dims`.
    pub fn check_signature(&self, dims: &[usize]) -> Result<()> {
        if self.factors.len() != dims.len() {
            return Err(Error::Dimension {
                expected: dims.len(),
                found: self.factors.len(),
            });
        }
        for (f, &n) in self.factors.iter().zip(dims) {
            if f.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: f.len(),
                });
            }
        }
        Ok(())
    }
}

impl Index<usize> for ProductPoint {
    type Output = PositiveVector;

    fn index(&self, i: usize) -> &PositiveVector {
        &self.factors[i]
    }
}

/// Per-factor distances `delta(x, y) = (d_1(x_1, y_1), ..., d_nu(x_nu, y_nu))`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(transparent))]
pub struct MetricVector {
    entries: Vec<f64>,
}

impl MetricVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Negative { index, value });
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: alloc::vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

impl Index<usize> for MetricVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

fn same_len(x: &PositiveVector, y: &PositiveVector) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(())
}

/// `M(x/y) = max_k x_k / y_k`, the smallest `beta` with `x <= beta * y`.
pub fn sup_ratio(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    same_len(x, y)?;
    Ok(x.values
        .iter()
        .zip(&y.values)
        .map(|(a, b)| a / b)
        .fold(0.0, f64::max))
}

/// Hilbert projective distance `log(M(x/y) M(y/x))`, evaluated as
/// `max_k (log x_k - log y_k) - min_k (log x_k - log y_k)`.
pub fn hilbert_distance(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    same_len(x, y)?;
    Ok(log_spread(
        x.values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| libm::log(*a) - libm::log(*b)),
    ))
}

/// `max - min` of a nonempty sequence; the Hilbert distance of two vectors
/// given their log-ratio.
pub(crate) fn log_spread(diffs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = diffs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
        (lo.min(d), hi.max(d))
    });
    (hi - lo).max(0.0)
}

pub fn product_distance(x: &ProductPoint, y: &ProductPoint) -> Result<MetricVector> {
    y.check_signature(&x.dims())?;
    let entries = x
        .factors
        .iter()
        .zip(&y.factors)
        .map(|(a, b)| hilbert_distance(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricVector { entries })
}

/// A continuous, positively homogeneous functional `phi` selecting the unit
/// slice `{x : phi(x) = 1}` of a cone component.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Normalization {
    /// `max_k x_k`.
    Sup,
    /// `(sum_k w_k x_k^p)^(1/p)`, `p >= 1`.
    PNorm(f64),
    /// `(sum_k w_k x_k^r)^(1/r)` for any finite `r != 0`.
    PowerMean(f64),
}

impl Normalization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Normalization::Sup => Ok(()),
            Normalization::PNorm(p) if p.is_finite() && p >= 1.0 => Ok(()),
            Normalization::PNorm(_) => Err(Error::InvalidNormalization(
                "p-norm exponent must be finite and at least 1",
            )),
            Normalization::PowerMean(r) if r.is_finite() && r != 0.0 => Ok(()),
            Normalization::PowerMean(_) => Err(Error::InvalidNormalization(
                "power-mean exponent must be finite and nonzero",
            )),
        }
    }

    /// Evaluates `log phi(x)` from the entrywise logs of `x`. Weights default
    /// to one.
    pub fn log_value(&self, logs: &[f64], weights: Option<&[f64]>) -> Result<f64> {
        self.validate()?;
        if let Some(w) = weights {
            if w.len() != logs.len() {
                return Err(Error::Dimension {
                    expected: logs.len(),
                    found: w.len(),
                });
            }
        }
        match *self {
            Normalization::Sup => Ok(logs.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Normalization::PNorm(r) | Normalization::PowerMean(r) => {
                let terms = logs
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| r * l + weights.map_or(0.0, |w| libm::log(w[k])));
                Ok(log_sum_exp(terms) / r)
            }
        }
    }

    pub fn value(&self, x: &PositiveVector, weights: Option<&[f64]>) -> Result<f64> {
        Ok(libm::exp(self.log_value(&x.logs(), weights)?))
    }
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + libm::log(terms.map(|t| libm::exp(t - m)).sum::<f64>())
}

/// Rescales `x` onto the unit slice of `rule`: returns `x / phi(x)`.
pub fn normalize(
    x: &PositiveVector,
    rule: &Normalization,
    weights: Option<&[f64]>,
) -> Result<PositiveVector> {
    let logs = x.logs();
    let shift = rule.log_value(&logs, weights)?;
    if let Normalization::Sup = rule {
        let m = x.values.iter().copied().fold(0.0, f64::max);
        return PositiveVector::new(x.values.iter().map(|v| v / m).collect());
    }
    PositiveVector::new(logs.iter().map(|l| libm::exp(l - shift)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> PositiveVector {
        PositiveVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_nonpositive_entries() {
        assert_eq!(PositiveVector::new(vec![]), Err(Error::Empty));
        assert!(matches!(
            PositiveVector::new(vec![1.0, 0.0]),
            Err(Error::NotPositive { index: 1, .. })
        ));
        assert!(PositiveVector::new(vec![1e-301]).is_err());
        assert!(PositiveVector::new(vec![f64::INFINITY]).is_err());
        assert!(PositiveVector::new(vec![f64::NAN]).is_err());
        assert!(PositiveVector::new(vec![1e-300]).is_ok());
    }

    #[test]
    fn sup_ratio_examples() {
        let x = pv(&[0.3, 7.0, 2.5]);
        assert_eq!(sup_ratio(&x, &x).unwrap(), 1.0);
        assert_eq!(sup_ratio(&pv(&[2.0, 6.0]), &pv(&[1.0, 2.0])).unwrap(), 3.0);
        assert_eq!(sup_ratio(&pv(&[1.0, 2.0]), &pv(&[2.0, 1.0])).unwrap(), 2.0);
        assert!(matches!(
            sup_ratio(&pv(&[1.0]), &pv(&[1.0, 2.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn hilbert_distance_examples() {
        let x = pv(&[0.5, 1.5, 4.0]);
        assert!(hilbert_distance(&x, &x.scaled(3.0).unwrap()).unwrap() <= 1e-15);
        // log(2 * 2) and log(1 * 2)
        assert_relative_eq!(
            hilbert_distance(&pv(&[1.0, 2.0]), &pv(&[2.0, 1.0])).unwrap(),
            1.3862943611198906,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            hilbert_distance(&pv(&[1.0, 1.0]), &pv(&[1.0, 2.0])).unwrap(),
            core::f64::consts::LN_2,
            max_relative = 1e-15
        );
        assert!(hilbert_distance(&pv(&[1.0]), &pv(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn extreme_ratios_do_not_overflow() {
        let d = hilbert_distance(&pv(&[1e-300, 1e300]), &pv(&[1e300, 1e-300])).unwrap();
        assert_relative_eq!(
            d,
            4.0 * 300.0 * core::f64::consts::LN_10,
            max_relative = 1e-14
        );
    }

    #[test]
    fn product_distance_examples() {
        let x = ProductPoint::new(vec![pv(&[1.0, 2.0]), pv(&[1.0, 1.0])]).unwrap();
        let y = ProductPoint::new(vec![pv(&[2.0, 1.0]), pv(&[1.0, 2.0])]).unwrap();
        assert_eq!(product_distance(&x, &x).unwrap(), MetricVector::zeros(2));
        let d = product_distance(&x, &y).unwrap();
        assert_relative_eq!(d[0], 4f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(d[1], 2f64.ln(), max_relative = 1e-15);
        let y2 = ProductPoint::new(vec![pv(&[2.0, 4.0]), pv(&[2.0, 2.0])]).unwrap();
        assert_eq!(product_distance(&x, &y2).unwrap(), MetricVector::zeros(2));
        let short = ProductPoint::new(vec![pv(&[1.0, 2.0])]).unwrap();
        assert!(product_distance(&x, &short).is_err());
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&pv(&[2.0, 4.0]), &Normalization::Sup, None).unwrap();
        assert_eq!(n.as_slice(), &[0.5, 1.0]);
        let n = normalize(&pv(&[3.0, 4.0]), &Normalization::PNorm(2.0), None).unwrap();
        assert_relative_eq!(n[0], 0.6, max_relative = 1e-15);
        assert_relative_eq!(n[1], 0.8, max_relative = 1e-15);
        let n = normalize(
            &pv(&[3.0, 4.0]),
            &Normalization::PowerMean(2.0),
            Some(&[1.0, 1.0]),
        )
        .unwrap();
        assert_relative_eq!(n[0], 0.6, max_relative = 1e-15);
        assert_relative_eq!(n[1], 0.8, max_relative = 1e-15);
    }

    #[test]
    fn normalize_errors() {
        let x = pv(&[1.0, 2.0]);
        assert!(matches!(
            normalize(&x, &Normalization::PowerMean(0.0), None),
            Err(Error::InvalidNormalization(_))
        ));
        assert!(normalize(&x, &Normalization::PNorm(0.5), None).is_err());
        assert!(normalize(&x, &Normalization::PNorm(2.0), Some(&[1.0])).is_err());
    }

    #[test]
    fn negative_power_mean_lands_on_slice() {
        let x = pv(&[0.2, 3.0, 11.0]);
        let w = [0.5, 1.0, 2.0];
        let rule = Normalization::PowerMean(-1.5);
        let n = normalize(&x, &rule, Some(&w)).unwrap();
        assert_relative_eq!(rule.value(&n, Some(&w)).unwrap(), 1.0, max_relative = 1e-14);
    }

    fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-6.0f64..6.0, n).prop_map(|v| v.iter().map(|l| l.exp()).collect())
    }

    proptest! {
        #[test]
        fn projectivity(
            (x, y) in (1usize..8).prop_flat_map(|n| (positive_vec(n), positive_vec(n))),
            a in -5.0f64..5.0, b in -5.0f64..5.0,
        ) {
            let (x, y) = (pv(&x), pv(&y));
            let d = hilbert_distance(&x, &y).unwrap();
            let ds = hilbert_distance(&x.scaled(a.exp()).unwrap(), &y.scaled(b.exp()).unwrap()).unwrap();
            prop_assert!((d - ds).abs() <= 1e-12);
        }

        #[test]
        fn symmetry_and_triangle(
            (x, y, z) in (1usize..8).prop_flat_map(|n| (positive_vec(n), positive_vec(n), positive_vec(n))),
        ) {
            let (x, y, z) = (pv(&x), pv(&y), pv(&z));
            let dxy = hilbert_distance(&x, &y).unwrap();
            prop_assert!((dxy - hilbert_distance(&y, &x).unwrap()).abs() <= 1e-12);
            let dxz = hilbert_distance(&x, &z).unwrap();
            let dzy = hilbert_distance(&z, &y).unwrap();
            prop_assert!(dxy <= dxz + dzy + 1e-12);
        }

        #[test]
        fn zero_distance_iff_unit_ratio_product(
            (x, y) in (1usize..6).prop_flat_map(|n| (positive_vec(n), positive_vec(n))),
            collinear in any::<bool>(), c in 0.1f64..10.0,
        ) {
            let x = pv(&x);
            let y = if collinear { x.scaled(c).unwrap() } else { pv(&y) };
            let d = hilbert_distance(&x, &y).unwrap();
            let m = sup_ratio(&x, &y).unwrap() * sup_ratio(&y, &x).unwrap();
            prop_assert_eq!(d <= 1e-12, (m - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn normalize_is_idempotent(x in (1usize..8).prop_flat_map(positive_vec), pick in 0usize..3) {
            let rule = [Normalization::Sup, Normalization::PNorm(3.0), Normalization::PowerMean(-2.0)][pick];
            let once = normalize(&pv(&x), &rule, None).unwrap();
            let twice = normalize(&once, &rule, None).unwrap();
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
            prop_assert!((rule.value(&once, None).unwrap() - 1.0).abs() <= 1e-14);
        }
    }
}
