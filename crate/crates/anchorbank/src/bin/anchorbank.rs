fn main() {
    std::process::exit(anchorbank::cli::run(std::env::args_os()));
}
