fn main() {
    std::process::exit(hypercopy::cli::run(std::env::args()));
}
