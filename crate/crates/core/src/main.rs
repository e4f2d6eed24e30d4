fn main() {
    std::process::exit(stabilize_core::cli::cli_main(std::env::args_os()));
}
