//! Table of `||H||_{2,...,2}` against the bound `n^(nu/2) sin(pi/n)`.

use std::fmt::Write as _;

use conetract_core::{hilbert_norm_bound, tensor_norm, Error, SolveOptions};

use crate::report::fmt_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Certified,
    /// `rho(B) >= 1`, not solved.
    Uncertified,
    /// Solved without a certificate.
    Unverified,
    NotConverged,
    BoundViolated,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Certified => "certified",
            RowStatus::Uncertified => "uncertified",
            RowStatus::Unverified => "unverified",
            RowStatus::NotConverged => "not_converged",
            RowStatus::BoundViolated => "bound_violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub nu: usize,
    pub n: usize,
    pub norm: Option<f64>,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub status: RowStatus,
    pub rho: Option<f64>,
}

/// One row per `(nu, n)`, sorted. Refusals become rows, never errors.
pub fn figure_rows(
    nus: &[usize],
    ns: std::ops::RangeInclusive<usize>,
    opts: &SolveOptions,
) -> Result<Vec<FigureRow>, Error> {
    let mut nus = nus.to_vec();
    nus.sort_unstable();
    nus.dedup();
    let mut rows = Vec::new();
    for &nu in &nus {
        for n in ns.clone() {
            let p = vec![2.0; nu];
            let bound = hilbert_norm_bound(nu, n);
            let row = match tensor_norm(nu, n, &p, opts) {
                Ok(t) => {
                    let certified = t.result.certificate.as_ref().is_some_and(|c| c.certified);
                    let status = if !t.result.converged {
                        RowStatus::NotConverged
                    } else if certified {
                        RowStatus::Certified
                    } else {
                        RowStatus::Unverified
                    };
                    FigureRow {
                        nu,
                        n,
                        norm: Some(t.value),
                        bound,
                        ratio: bound.map(|b| t.value / b),
                        status,
                        rho: t.result.certificate.map(|c| c.rho_b),
                    }
                }
                Err(Error::NoCertificate { rho }) => FigureRow {
                    nu,
                    n,
                    norm: None,
                    bound,
                    ratio: None,
                    status: RowStatus::Uncertified,
                    rho: Some(rho),
                },
                Err(Error::BoundViolated { norm, bound }) => FigureRow {
                    nu,
                    n,
                    norm: Some(norm),
                    bound: Some(bound),
                    ratio: Some(norm / bound),
                    status: RowStatus::BoundViolated,
                    rho: None,
                },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "nu,n,norm,bound,ratio,status";

pub fn to_csv(rows: &[FigureRow]) -> String {
    let cell = |x: Option<f64>| x.map(fmt_number).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.nu,
            r.n,
            cell(r.norm),
            cell(r.bound),
            cell(r.ratio),
            r.status.as_str()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows_sit_below_bound() {
        let rows = figure_rows(&[2], 2..=8, &SolveOptions::default()).unwrap();
        assert_eq!(rows.len(), 7);
        for r in &rows {
            assert_eq!(r.status, RowStatus::Certified);
            let ratio = r.ratio.unwrap();
            assert!(ratio > 0.0 && ratio < 1.0);
        }
        let csv = to_csv(&rows);
        assert!(csv.starts_with("nu,n,norm,bound,ratio,status\n2,2,1.26759187924"));
        assert_eq!(csv.lines().count(), 8);
    }

    #[test]
    fn refusals_become_rows() {
        let rows = figure_rows(&[3], 20..=20, &SolveOptions::default()).unwrap();
        assert_eq!(rows[0].status, RowStatus::Uncertified);
        assert!(rows[0].rho.unwrap() > 1.0);
        let csv = to_csv(&rows);
        let line = csv.lines().nth(1).unwrap();
        assert!(
            line.starts_with("3,20,,") && line.ends_with(",,uncertified"),
            "{line}"
        );
    }
}
