fn main() {
    std::process::exit(codemix::cli::run());
}
