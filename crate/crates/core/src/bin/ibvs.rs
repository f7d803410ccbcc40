fn main() {
    std::process::exit(ibvs::cli::run_cli(std::env::args_os()));
}
