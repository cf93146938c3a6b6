fn main() {
    std::process::exit(magtomo::cli::main());
}
