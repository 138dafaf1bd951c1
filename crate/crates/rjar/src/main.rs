fn main() {
    std::process::exit(rjar::cli::run_cli(std::env::args_os()));
}
