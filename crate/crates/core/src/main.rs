fn main() {
    std::process::exit(polariton::cli::main_with_args(std::env::args_os()));
}
