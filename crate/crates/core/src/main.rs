fn main() {
    std::process::exit(optical_entropy::cli::main_with_args(std::env::args_os()));
}
