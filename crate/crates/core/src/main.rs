fn main() {
    std::process::exit(mcil::cli::run_cli(std::env::args_os()));
}
