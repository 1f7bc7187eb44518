use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dogan_cli::run(std::env::args_os()))
}
