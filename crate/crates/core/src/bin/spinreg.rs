fn main() {
    std::process::exit(spinreg::cli::main_with_args(std::env::args_os()));
}
