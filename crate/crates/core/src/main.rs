fn main() {
    std::process::exit(digs::cli::main_with_args(std::env::args_os()));
}
