fn main() {
    std::process::exit(langrank::cli::main_with_args(std::env::args_os()));
}
