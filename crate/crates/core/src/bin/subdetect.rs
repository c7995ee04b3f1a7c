fn main() {
    std::process::exit(subdetect::cli::run(std::env::args_os()));
}
