use std::process::ExitCode;

fn main() -> ExitCode {
    snn_hrl::cli::main_with_args(std::env::args_os())
}
