fn main() {
    std::process::exit(ham::cli::run(std::env::args_os()));
}
