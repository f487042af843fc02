fn main() {
    std::process::exit(gpdetect::cli::main_with_args(std::env::args_os()));
}
