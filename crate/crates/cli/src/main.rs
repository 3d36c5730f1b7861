use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ebc_cli::run(std::env::args_os()))
}
