fn main() {
    std::process::exit(billiard_bvp::cli::main_with_args(std::env::args_os()));
}
