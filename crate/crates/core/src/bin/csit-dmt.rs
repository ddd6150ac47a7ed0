fn main() {
    std::process::exit(csit_dmt::cli::run(std::env::args_os()));
}
