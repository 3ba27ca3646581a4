use std::process::ExitCode;

fn main() -> ExitCode {
    stegcmdp_cli::run(std::env::args_os())
}
