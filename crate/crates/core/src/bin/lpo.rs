fn main() {
    std::process::exit(lpo::cli::main());
}
