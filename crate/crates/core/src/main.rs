fn main() {
    std::process::exit(hintforge::cli::run(std::env::args_os()));
}
