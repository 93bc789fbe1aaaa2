fn main() {
    std::process::exit(drmean_cli::main_with_args(std::env::args_os()));
}
