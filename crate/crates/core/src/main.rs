use std::process::ExitCode;

fn main() -> ExitCode {
    swr_core::cli::main_with_args(std::env::args_os())
}
