fn main() {
    std::process::exit(spinorlab::cli::main());
}
