fn main() -> std::process::ExitCode {
    vocscreen_cli::main_with(std::env::args_os())
}
