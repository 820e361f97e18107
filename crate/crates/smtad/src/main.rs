fn main() {
    std::process::exit(smtad::cli::main());
}
