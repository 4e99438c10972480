fn main() {
    std::process::exit(cvtele_cli::run(std::env::args_os()));
}
