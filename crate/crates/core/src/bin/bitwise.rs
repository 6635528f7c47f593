fn main() {
    std::process::exit(bitwise::cli::run(std::env::args_os()));
}
