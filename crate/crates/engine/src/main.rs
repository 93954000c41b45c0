use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = anywhere::cli::main_with_args(std::env::args_os(), &mut io::stdout().lock());
    ExitCode::from(code as u8)
}
