fn main() {
    std::process::exit(calfbench::cli::run(std::env::args_os()));
}
