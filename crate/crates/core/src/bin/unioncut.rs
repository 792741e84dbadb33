use std::process::ExitCode;

fn main() -> ExitCode {
    // unlocked handles: worker threads log to stderr while the command runs
    let code = unioncut::cli::run_cli(
        std::env::args_os(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    ExitCode::from(code as u8)
}
