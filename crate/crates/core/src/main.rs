fn main() {
    std::process::exit(splitseg::cli::run(std::env::args_os()));
}
