fn main() {
    std::process::exit(lp_isoforge::cli::run(std::env::args_os()));
}
