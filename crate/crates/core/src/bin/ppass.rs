fn main() {
    std::process::exit(partial_password::cli::main_with_env());
}
