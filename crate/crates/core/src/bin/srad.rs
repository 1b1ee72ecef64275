fn main() {
    std::process::exit(srad::cli::main());
}
