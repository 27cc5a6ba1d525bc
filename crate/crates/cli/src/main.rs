fn main() {
    std::process::exit(bifbm_cli::main_with_args(std::env::args_os()));
}
