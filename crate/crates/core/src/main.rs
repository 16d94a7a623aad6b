fn main() {
    std::process::exit(jetspray::cli::main_with_args(std::env::args_os()));
}
