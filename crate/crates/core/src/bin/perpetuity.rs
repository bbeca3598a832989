fn main() {
    std::process::exit(perpetuity::cli::main_from_env());
}
