fn main() {
    std::process::exit(rosmm::cli::main_with_args(std::env::args()));
}
