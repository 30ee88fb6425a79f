fn main() {
    std::process::exit(mvhvi::cli::run(std::env::args_os()));
}
