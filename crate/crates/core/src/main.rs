fn main() {
    std::process::exit(ulil::cli::run_from_args(std::env::args_os()));
}
