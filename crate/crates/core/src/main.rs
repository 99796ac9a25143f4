fn main() {
    std::process::exit(scale_bo::cli::main_with_args(std::env::args_os()));
}
