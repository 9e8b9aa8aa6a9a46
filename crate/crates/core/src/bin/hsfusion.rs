fn main() {
    std::process::exit(hsfusion::cli::run(std::env::args_os()));
}
