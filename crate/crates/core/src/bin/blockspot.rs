fn main() {
    std::process::exit(blockspot::cli::main());
}
