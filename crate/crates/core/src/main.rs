fn main() {
    std::process::exit(iaqsim::cli_main());
}
