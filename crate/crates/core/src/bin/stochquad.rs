fn main() {
    std::process::exit(stochquad::cli::run_from_args(std::env::args_os()));
}
