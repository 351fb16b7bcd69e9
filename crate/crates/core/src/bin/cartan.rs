fn main() {
    std::process::exit(cartan_core::cli::main_with_args(std::env::args_os()));
}
