fn main() {
    std::process::exit(uc_cli::run(std::env::args_os()));
}
