fn main() {
    std::process::exit(lucca::cli::run(std::env::args_os()));
}
