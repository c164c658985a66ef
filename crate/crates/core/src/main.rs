fn main() {
    std::process::exit(vadtok::cli::run(std::env::args_os()));
}
