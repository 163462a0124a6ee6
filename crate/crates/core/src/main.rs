fn main() {
    std::process::exit(faulty_sector::cli::main_with_args(std::env::args_os()));
}
