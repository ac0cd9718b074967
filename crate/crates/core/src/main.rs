fn main() {
    std::process::exit(ttlab::cli::main_with_args(std::env::args_os()));
}
