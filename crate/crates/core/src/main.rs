fn main() {
    std::process::exit(ctverify::cli::run(std::env::args_os()));
}
