fn main() {
    std::process::exit(fert_core::cli::main_with_args(std::env::args_os()));
}
