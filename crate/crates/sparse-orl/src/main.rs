fn main() {
    std::process::exit(sparse_orl::harness::cli::run(std::env::args_os()));
}
