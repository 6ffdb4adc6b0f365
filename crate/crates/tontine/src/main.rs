use std::process::ExitCode;

fn main() -> ExitCode {
    tontine::cli::run()
}
