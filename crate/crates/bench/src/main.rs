fn main() {
    std::process::exit(fekan_bench::cli::cli_main(std::env::args_os()));
}
