fn main() {
    std::process::exit(tsasd_core::cli::run(std::env::args_os()));
}
