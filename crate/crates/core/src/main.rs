fn main() {
    std::process::exit(pulling::cli::main_from(std::env::args_os()));
}
