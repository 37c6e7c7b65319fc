//! JSON kernel and problem files.
//!
//! ```json
//! {
//!   "nu": 2,
//!   "dims": [2, 3],
//!   "values": [1, 2, 3, 4, 5, 6],
//!   "weights": [[1, 1], [0.5, 0.5, 0.5]],
//!   "alpha": [[0, 1], [1, 0]],
//!   "gamma": [1, 1],
//!   "normalization": {"p_norm": 2},
//!   "tol": 1e-12
//! }
//! ```
//!
//! `values` may also be `{"builtin": "hilbert"}` (all dims equal). Every
//! field except `nu`, `dims` and `values` is optional. Unknown fields are
//! rejected.

use std::fmt;
use std::path::Path;

use conetract_core::{hilbert_tensor, DenseKernel, ExponentSpec, Normalization, ProblemSpec};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub nu: usize,
    pub dims: Vec<usize>,
    pub values: Values,
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub alpha: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub gamma: Option<Vec<f64>>,
    #[serde(default)]
    pub normalization: Option<NormalizationField>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Flat(Vec<f64>),
    Builtin(BuiltinRef),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinRef {
    pub builtin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationRule {
    Sup,
    PNorm(f64),
    PowerMean(f64),
}

impl From<NormalizationRule> for Normalization {
    fn from(r: NormalizationRule) -> Self {
        match r {
            NormalizationRule::Sup => Normalization::Sup,
            NormalizationRule::PNorm(p) => Normalization::PNorm(p),
            NormalizationRule::PowerMean(r) => Normalization::PowerMean(r),
        }
    }
}

/// One rule for every factor, or one per factor.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NormalizationField {
    Single(NormalizationRule),
    PerFactor(Vec<NormalizationRule>),
}

/// A malformed or inconsistent input file.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub field: Option<&'static str>,
    pub message: String,
}

impl InputError {
    fn field(field: &'static str, message: impl fmt::Display) -> Self {
        Self {
            field: Some(field),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field {
            Some(name) => write!(f, "field `{name}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for InputError {}

/// Problem read from a file, with the optional file tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub tol: Option<f64>,
}

pub fn parse_problem(text: &str) -> Result<Problem, InputError> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| InputError {
        field: None,
        message: e.to_string(),
    })?;
    file.into_problem()
}

pub fn read_problem(path: &Path) -> Result<Problem, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError {
        field: None,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_problem(&text).map_err(|e| InputError {
        field: e.field,
        message: format!("{}: {}", path.display(), e.message),
    })
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<Problem, InputError> {
        let nu = self.nu;
        if nu < 1 {
            return Err(InputError::field("nu", "must be at least 1"));
        }
        if self.dims.len() != nu {
            return Err(InputError::field(
                "dims",
                format!("expected {nu} entries, found {}", self.dims.len()),
            ));
        }
        let mut kernel = match self.values {
            Values::Flat(v) => DenseKernel::new(self.dims.clone(), v, None)
                .map_err(|e| InputError::field("values", e))?,
            Values::Builtin(b) => builtin_kernel(&b.builtin, nu, &self.dims)?,
        };
        if let Some(w) = self.weights {
            kernel = kernel
                .with_weights(w)
                .map_err(|e| InputError::field("weights", e))?;
        }
        let gamma = self.gamma.unwrap_or_else(|| vec![1.0; nu]);
        let exponents = match self.alpha {
            Some(rows) => ExponentSpec::new(&rows, gamma),
            None => {
                let rows: Vec<Vec<f64>> = (0..nu)
                    .map(|i| (0..nu).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
                    .collect();
                ExponentSpec::new(&rows, gamma)
            }
        }
        .map_err(|e| InputError::field("alpha", e))?;
        if let Err(e) = exponents.check_gamma() {
            return Err(InputError::field("gamma", e));
        }
        let normalizations = match self.normalization {
            None => vec![Normalization::Sup; nu],
            Some(NormalizationField::Single(r)) => vec![r.into(); nu],
            Some(NormalizationField::PerFactor(rs)) => rs.into_iter().map(Into::into).collect(),
        };
        let spec = ProblemSpec::new(kernel, exponents, normalizations)
            .map_err(|e| InputError::field("normalization", e))?;
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(InputError::field("tol", "must be positive"));
            }
        }
        Ok(Problem {
            spec,
            tol: self.tol,
        })
    }
}

fn builtin_kernel(name: &str, nu: usize, dims: &[usize]) -> Result<DenseKernel, InputError> {
    if name != "hilbert" {
        return Err(InputError::field(
            "values",
            format!("unknown builtin `{name}`"),
        ));
    }
    let n = dims[0];
    if dims.iter().any(|&d| d != n) {
        return Err(InputError::field(
            "dims",
            "the hilbert builtin needs equal dims",
        ));
    }
    hilbert_tensor(nu, n).map_err(|e| InputError::field("values", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let p = parse_problem(
            r#"{"nu": 2, "dims": [2, 3], "values": [1, 2, 3, 4, 5, 6],
                "weights": [[1, 1], [0.5, 0.5, 0.5]],
                "alpha": [[0, 2], [1, 0]], "gamma": [-1, 1],
                "normalization": [{"p_norm": 2}, "sup"], "tol": 1e-9}"#,
        )
        .unwrap();
        assert_eq!(p.tol, Some(1e-9));
        assert_eq!(p.spec.kernel.get(&[1, 2]), 6.0);
        assert_eq!(p.spec.kernel.weights(1), &[0.5, 0.5, 0.5]);
        assert_eq!(p.spec.exponents.alpha(0, 1), 2.0);
        assert_eq!(p.spec.exponents.gamma(0), -1.0);
        assert_eq!(
            p.spec.normalizations,
            vec![Normalization::PNorm(2.0), Normalization::Sup]
        );
    }

    #[test]
    fn builtin_hilbert_with_defaults() {
        let p = parse_problem(r#"{"nu": 3, "dims": [4, 4, 4], "values": {"builtin": "hilbert"}}"#)
            .unwrap();
        assert_eq!(p.spec.kernel.get(&[3, 3, 3]), 1.0 / 10.0);
        assert_eq!(p.spec.exponents.alpha(2, 0), 1.0);
        assert_eq!(p.spec.exponents.gammas(), &[1.0, 1.0, 1.0]);
        assert_eq!(p.spec.normalizations, vec![Normalization::Sup; 3]);
    }

    #[test]
    fn rejects_bad_input() {
        let e = parse_problem(r#"{"nu": 1, "dims": [1], "values": [1], "colour": 3}"#).unwrap_err();
        assert!(
            e.message.contains("unknown field") && e.message.contains("line 1"),
            "{e}"
        );
        let e = parse_problem(r#"{"nu": 2, "dims": [2], "values": [1, 2]}"#).unwrap_err();
        assert_eq!(e.field, Some("dims"));
        let e = parse_problem(r#"{"nu": 1, "dims": [2], "values": [1, 0]}"#).unwrap_err();
        assert_eq!(e.field, Some("values"));
        let e = parse_problem(r#"{"nu": 2, "dims": [1, 1], "values": [1], "gamma": [1, 0]}"#)
            .unwrap_err();
        assert_eq!(e.field, Some("gamma"));
        assert!(e.to_string().contains("gamma"));
        let e = parse_problem(r#"{"nu": 2, "dims": [2, 3], "values": {"builtin": "hilbert"}}"#)
            .unwrap_err();
        assert_eq!(e.field, Some("dims"));
        let e = parse_problem(
            r#"{"nu": 1, "dims": [1], "values": [1], "normalization": {"p_norm": 0.5}}"#,
        )
        .unwrap_err();
        assert_eq!(e.field, Some("normalization"));
    }
}
