fn main() {
    std::process::exit(prevmap_cli::run(std::env::args_os()));
}
