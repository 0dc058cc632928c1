fn main() {
    std::process::exit(ctrlgrad::cli::run(std::env::args_os()));
}
