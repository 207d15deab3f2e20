fn main() {
    std::process::exit(dualq_cli::run(std::env::args_os()));
}
