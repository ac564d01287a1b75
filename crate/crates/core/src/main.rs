fn main() {
    std::process::exit(smqc::cli::main());
}
