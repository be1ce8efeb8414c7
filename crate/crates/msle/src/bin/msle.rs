fn main() {
    std::process::exit(msle::cli_main());
}
