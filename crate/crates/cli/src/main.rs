use std::process::ExitCode;

fn main() -> ExitCode {
    csph_cli::run(std::env::args_os())
}
