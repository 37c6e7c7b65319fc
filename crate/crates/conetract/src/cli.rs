//! Command-line front end. Exit codes: 0 success, 1 input error,
//! 2 certificate refused (or not certified), 3 no convergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conetract_core::{
    global_lambda_solve, hilbert_cross_ratio, hilbert_tensor, solve_with_certificate, tensor_norm,
    ContractionCertificate, Error, ExponentSpec, Normalization, ProblemSpec, SolveOptions,
    DEFAULT_CROSS_RATIO_CAP,
};
use serde_json::json;

use crate::figure::{figure_rows, to_csv};
use crate::format::{read_problem, InputError};
use crate::report::{fmt_number, to_json, to_pretty};
use crate::scan::{cross_ratio_parallel, lipschitz, thread_count};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_REFUSED: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "conetract",
    version,
    about = "Contraction certificates and power iteration for positive multilinear kernels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the Lipschitz matrices, rho(B) and the left Perron vector.
    Certify {
        #[command(flatten)]
        source: Source,
    },
    /// Solve f_i(x) = lambda_i x_i^gamma_i by the normalized power sequence.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Normalization for every factor: sup, pnorm:P or powermean:R.
        #[arg(long, value_parser = parse_norm)]
        norm: Option<Normalization>,
        /// Run even when rho(B) >= 1 (no error bound).
        #[arg(long)]
        uncertified: bool,
        /// Solve for one common lambda (column-constant alpha).
        #[arg(long)]
        global: bool,
    },
    /// (p_1, ..., p_nu)-norm of the Hilbert tensor.
    HilbertNorm {
        #[arg(long)]
        nu: usize,
        #[arg(long)]
        n: usize,
        /// Comma-separated exponents; defaults to 2 for every mode.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long)]
        uncertified: bool,
    },
    /// Kernel cross-ratios Delta_j by exhaustive scan.
    CrossRatio {
        #[command(flatten)]
        source: Source,
        #[arg(long, conflicts_with = "all")]
        mode: Option<usize>,
        #[arg(long)]
        all: bool,
    },
    /// CSV of the Hilbert tensor 2-norm against n^(nu/2) sin(pi/n).
    Figure {
        #[arg(long, value_delimiter = ',', required = true)]
        nu_list: Vec<usize>,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        uncertified: bool,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Hilbert,
}

/// Kernel or problem: a JSON file or a builtin.
#[derive(Debug, Args)]
pub struct Source {
    /// Kernel/problem JSON file.
    #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
    pub file: Option<PathBuf>,
    #[arg(long, requires_all = ["nu", "n"])]
    pub builtin: Option<Builtin>,
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Off-diagonal alpha for every pair (replaces the file's matrix).
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// gamma for every factor (replaces the file's vector).
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Largest kernel (entry count) for the exhaustive cross-ratio scan.
    #[arg(long, default_value_t = DEFAULT_CROSS_RATIO_CAP)]
    pub cap: usize,
}

fn parse_norm(s: &str) -> Result<Normalization, String> {
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|e| format!("bad number `{v}`: {e}"))
    };
    let rule = match s.split_once(':') {
        None if s == "sup" => Normalization::Sup,
        Some(("pnorm", v)) => Normalization::PNorm(num(v)?),
        Some(("powermean", v)) => Normalization::PowerMean(num(v)?),
        _ => return Err(format!("expected sup, pnorm:P or powermean:R, got `{s}`")),
    };
    rule.validate().map_err(|e| e.to_string())?;
    Ok(rule)
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::input(e)
    }
}

fn core_failure(e: Error) -> Failure {
    match e {
        Error::NoCertificate { rho } => Failure {
            code: EXIT_REFUSED,
            message: format!("refused: rho(B) = {} is not below 1", fmt_number(rho)),
        },
        Error::TooLarge { entries, cap } => Failure::input(format!(
            "kernel has {entries} entries, above the scan cap {cap}; raise --cap or use a builtin with a closed form"
        )),
        Error::BoundViolated { norm, bound } => Failure {
            code: EXIT_NO_CONVERGENCE,
            message: format!("norm {} exceeds bound {}", fmt_number(norm), fmt_number(bound)),
        },
        e => Failure::input(e),
    }
}

struct Loaded {
    spec: ProblemSpec,
    tol: Option<f64>,
}

fn load(source: &Source) -> Result<Loaded, Failure> {
    let (mut spec, tol) = match (&source.file, source.builtin) {
        (Some(path), _) => {
            let p = read_problem(path)?;
            (p.spec, p.tol)
        }
        (None, Some(Builtin::Hilbert)) => {
            let (nu, n) = (source.nu.unwrap_or(0), source.n.unwrap_or(0));
            let kernel = hilbert_tensor(nu, n).map_err(Failure::input)?;
            let ex = ExponentSpec::uniform(nu, 1.0, 1.0).map_err(Failure::input)?;
            (
                ProblemSpec::new(kernel, ex, vec![Normalization::PNorm(2.0); nu])
                    .map_err(Failure::input)?,
                None,
            )
        }
        (None, None) => return Err(Failure::input("give a problem file or --builtin")),
    };
    if source.alpha.is_some() || source.gamma.is_some() {
        let nu = spec.order();
        let alpha: Vec<Vec<f64>> = (0..nu)
            .map(|i| {
                (0..nu)
                    .map(|j| match source.alpha {
                        Some(a) if i != j => a,
                        _ => spec.exponents.alpha(i, j),
                    })
                    .collect()
            })
            .collect();
        let gamma = match source.gamma {
            Some(g) => vec![g; nu],
            None => spec.exponents.gammas().to_vec(),
        };
        spec.exponents = ExponentSpec::new(&alpha, gamma).map_err(Failure::input)?;
    }
    spec.exponents
        .check_gamma()
        .map_err(|e| Failure::input(format!("gamma: {e}")))?;
    Ok(Loaded { spec, tol })
}

fn certificate(spec: &ProblemSpec, cap: usize) -> Result<ContractionCertificate, Error> {
    let (a, b) = lipschitz(spec, cap)?;
    ContractionCertificate::new(a, b)
}

fn options(
    tol: Option<f64>,
    file_tol: Option<f64>,
    max_iter: usize,
    uncertified: bool,
) -> Result<SolveOptions, Failure> {
    let opts = SolveOptions {
        tol: tol.or(file_tol).unwrap_or(SolveOptions::default().tol),
        max_iter,
        require_certificate: !uncertified,
    };
    opts.validate().map_err(Failure::input)?;
    Ok(opts)
}

/// Runs one command, writing results to `out`. Returns the exit code.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<u8, Failure> {
    let io = |e: std::io::Error| Failure::input(format!("write failed: {e}"));
    match cli.command {
        Command::Certify { source } => {
            let loaded = load(&source)?;
            let cert = certificate(&loaded.spec, source.cap).map_err(core_failure)?;
            writeln!(out, "{}", to_pretty(&cert)).map_err(io)?;
            Ok(if cert.certified {
                EXIT_OK
            } else {
                EXIT_REFUSED
            })
        }
        Command::Solve {
            source,
            tol,
            max_iter,
            norm,
            uncertified,
            global,
        } => {
            let mut loaded = load(&source)?;
            if let Some(rule) = norm {
                loaded.spec.normalizations = vec![rule; loaded.spec.order()];
            }
            let opts = options(tol, loaded.tol, max_iter, uncertified)?;
            let (value, converged) = if global {
                let g = global_lambda_solve(&loaded.spec, &opts).map_err(core_failure)?;
                let converged = g.result.converged;
                (to_json(&g), converged)
            } else {
                let cert = match certificate(&loaded.spec, source.cap) {
                    Ok(c) => Some(c),
                    Err(Error::TooLarge { .. }) if uncertified => None,
                    Err(e) => return Err(core_failure(e)),
                };
                let r = solve_with_certificate(&loaded.spec, &opts, None, cert, |_, _| {})
                    .map_err(core_failure)?;
                (to_json(&r), r.converged)
            };
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&value).expect("json prints")
            )
            .map_err(io)?;
            Ok(if converged {
                EXIT_OK
            } else {
                EXIT_NO_CONVERGENCE
            })
        }
        Command::HilbertNorm {
            nu,
            n,
            p,
            tol,
            max_iter,
            uncertified,
        } => {
            let p = if p.is_empty() { vec![2.0; nu] } else { p };
            let opts = options(tol, None, max_iter, uncertified)?;
            let t = tensor_norm(nu, n, &p, &opts).map_err(core_failure)?;
            let doc = json!({
                "nu": nu,
                "n": n,
                "p": p,
                "norm": t.value,
                "bound": t.bound,
                "ratio": t.bound.map(|b| t.value / b),
                "result": t.result,
            });
            writeln!(out, "{}", to_pretty(&doc)).map_err(io)?;
            Ok(if t.result.converged {
                EXIT_OK
            } else {
                EXIT_NO_CONVERGENCE
            })
        }
        Command::CrossRatio {
            source,
            mode,
            all: _,
        } => {
            let loaded = load(&source)?;
            let kernel = &loaded.spec.kernel;
            let modes: Vec<usize> = match mode {
                Some(j) if j >= kernel.order() => {
                    return Err(Failure::input(format!(
                        "mode {j} out of range for order {}",
                        kernel.order()
                    )))
                }
                Some(j) => vec![j],
                None => (0..kernel.order()).collect(),
            };
            let closed = match source.builtin {
                Some(Builtin::Hilbert) if source.file.is_none() => Some(
                    hilbert_cross_ratio(kernel.order(), kernel.dims()[0]).map_err(core_failure)?,
                ),
                _ => None,
            };
            let threads = thread_count();
            let mut rows = Vec::new();
            for j in modes {
                let brute =
                    cross_ratio_parallel(kernel, j, source.cap, threads).map_err(core_failure)?;
                let mut row = json!({"mode": j, "brute": brute});
                if let Some(c) = closed {
                    row["closed"] = json!(c);
                    row["rel_diff"] = json!((brute - c).abs() / c);
                }
                rows.push(row);
            }
            writeln!(out, "{}", to_pretty(&json!({ "cross_ratios": rows }))).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Figure {
            nu_list,
            n_max,
            n_min,
            out: path,
            uncertified,
            tol,
        } => {
            if n_min > n_max {
                return Err(Failure::input("--n-min exceeds --n-max"));
            }
            let opts = options(tol, None, 100_000, uncertified)?;
            let rows = figure_rows(&nu_list, n_min..=n_max, &opts).map_err(core_failure)?;
            let csv = to_csv(&rows);
            match path {
                Some(p) => std::fs::write(&p, csv)
                    .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
                None => out.write_all(csv.as_bytes()).map_err(io)?,
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` and runs; diagnostics go to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(code) => {
            if code == EXIT_REFUSED {
                eprintln!("conetract: not certified (rho(B) >= 1)");
            } else if code == EXIT_NO_CONVERGENCE {
                eprintln!("conetract: no convergence within max_iter");
            }
            code
        }
        Err(f) => {
            eprintln!("conetract: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_flag() {
        assert_eq!(parse_norm("sup").unwrap(), Normalization::Sup);
        assert_eq!(parse_norm("pnorm:3").unwrap(), Normalization::PNorm(3.0));
        assert_eq!(
            parse_norm("powermean:-1").unwrap(),
            Normalization::PowerMean(-1.0)
        );
        assert!(parse_norm("pnorm:0.5").is_err());
        assert!(parse_norm("l2").is_err());
    }

    #[test]
    fn command_tree_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
