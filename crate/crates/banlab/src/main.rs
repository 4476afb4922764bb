fn main() {
    std::process::exit(banlab::cli::run(std::env::args_os()));
}
