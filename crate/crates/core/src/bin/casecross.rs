fn main() {
    std::process::exit(casecross::cli::run(std::env::args_os()));
}
