fn main() {
    std::process::exit(qrelay::cli::main_with_args(std::env::args_os()));
}
