fn main() {
    std::process::exit(shakhov_cli::run(std::env::args()));
}
