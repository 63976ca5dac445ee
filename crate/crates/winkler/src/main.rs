fn main() {
    std::process::exit(winkler::cli::main_with(std::env::args_os()));
}
