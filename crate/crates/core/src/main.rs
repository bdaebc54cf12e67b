fn main() {
    std::process::exit(aptp::cli::main_with_args(std::env::args_os()));
}
