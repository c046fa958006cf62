fn main() {
    std::process::exit(cassi_core::cli::run(std::env::args_os()));
}
