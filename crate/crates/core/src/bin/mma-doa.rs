fn main() {
    std::process::exit(mma_doa::harness::cli::cli_main(std::env::args_os()));
}
