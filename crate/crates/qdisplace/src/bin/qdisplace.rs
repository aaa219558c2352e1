fn main() {
    std::process::exit(qdisplace::cli::main());
}
