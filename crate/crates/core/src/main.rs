use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(drd::cli::run(std::env::args_os()))
}
