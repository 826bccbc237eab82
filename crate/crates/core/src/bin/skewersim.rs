fn main() {
    std::process::exit(skewersim::harness::cli::run(std::env::args_os()));
}
