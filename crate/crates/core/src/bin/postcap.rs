fn main() {
    std::process::exit(postcap::cli::main_with_args(std::env::args_os()));
}
