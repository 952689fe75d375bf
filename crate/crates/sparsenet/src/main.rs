fn main() {
    std::process::exit(sparsenet::cli::run_env());
}
