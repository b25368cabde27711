use std::process::ExitCode;

fn main() -> ExitCode {
    let code = torus_indep::cli::main_with_args(std::env::args().collect());
    ExitCode::from(code as u8)
}
