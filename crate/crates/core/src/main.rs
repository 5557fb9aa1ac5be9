fn main() {
    std::process::exit(noether_paths::cli::run(std::env::args_os()));
}
