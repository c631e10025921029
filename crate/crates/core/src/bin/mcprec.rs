fn main() {
    std::process::exit(multicast_precoding::cli::run(std::env::args_os()));
}
