fn main() {
    std::process::exit(semagg::cli::main());
}
