fn main() {
    std::process::exit(sgdlab::cli::main());
}
