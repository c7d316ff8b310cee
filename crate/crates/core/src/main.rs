use std::process::ExitCode;

fn main() -> ExitCode {
    xim::cli::run(std::env::args_os())
}
