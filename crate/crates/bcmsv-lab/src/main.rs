use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bcmsv_lab::experiments::run_cli(std::env::args_os()))
}
