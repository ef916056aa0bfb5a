fn main() {
    std::process::exit(optimal_mdf::cli::main_from_env());
}
