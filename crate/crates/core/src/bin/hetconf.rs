fn main() {
    std::process::exit(hetconf::cli::run(std::env::args_os()));
}
