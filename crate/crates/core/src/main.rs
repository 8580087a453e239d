fn main() {
    std::process::exit(singscat::cli::main_with_args(std::env::args_os()));
}
