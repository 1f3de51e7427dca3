fn main() {
    std::process::exit(liyau_cli::run(std::env::args_os()));
}
