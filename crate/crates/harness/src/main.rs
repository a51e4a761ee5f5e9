fn main() {
    std::process::exit(rsma_harness::cli::cli_main(std::env::args_os()));
}
