fn main() {
    std::process::exit(opinet::cli::run(std::env::args_os()));
}
