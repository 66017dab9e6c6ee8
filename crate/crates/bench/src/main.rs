use std::process::ExitCode;

fn main() -> ExitCode {
    echo_bench::cli::main_with_args(std::env::args_os())
}
