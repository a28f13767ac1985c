fn main() {
    std::process::exit(mbrh_cli::run_command(std::env::args_os()));
}
