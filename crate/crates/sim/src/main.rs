use std::process::ExitCode;

fn main() -> ExitCode {
    flare_sim::cli::main_with_args(std::env::args_os())
}
