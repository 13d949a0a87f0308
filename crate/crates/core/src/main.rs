fn main() {
    std::process::exit(fkg_overlap::cli::main_with_args(std::env::args_os()));
}
