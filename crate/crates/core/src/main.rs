fn main() {
    std::process::exit(causal_cert::cli::run(std::env::args_os()));
}
