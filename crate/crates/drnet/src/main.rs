fn main() {
    std::process::exit(drnet::cli::run(std::env::args_os()));
}
