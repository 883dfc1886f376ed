fn main() {
    std::process::exit(circulaw_cli::main_with_args(std::env::args_os()));
}
