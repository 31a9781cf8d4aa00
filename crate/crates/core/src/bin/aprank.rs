fn main() {
    std::process::exit(aprank::cli::run(std::env::args_os()));
}
