fn main() {
    std::process::exit(emaxbr::cli::main_from_env());
}
