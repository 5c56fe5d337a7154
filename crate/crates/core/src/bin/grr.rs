fn main() {
    std::process::exit(grr_core::cli::main_with_args(std::env::args_os()));
}
