fn main() {
    std::process::exit(factkit::cli::main_with(std::env::args_os()));
}
