use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(conetract::cli::run(std::env::args_os()))
}
