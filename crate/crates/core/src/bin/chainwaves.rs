fn main() {
    std::process::exit(chainwaves::cli::main_with_args(std::env::args_os()));
}
