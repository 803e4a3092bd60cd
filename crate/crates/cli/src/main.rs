use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let code = bbt_cli::run_args(std::env::args_os(), &mut stdout.lock());
    ExitCode::from(code)
}
