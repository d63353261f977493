fn main() {
    std::process::exit(fracld_cli::run(std::env::args_os()));
}
