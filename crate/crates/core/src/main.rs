fn main() {
    std::process::exit(isotau::cli::main_with_args(std::env::args_os()));
}
