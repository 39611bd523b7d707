fn main() {
    std::process::exit(btm_disagg::cli::run(std::env::args_os()));
}
