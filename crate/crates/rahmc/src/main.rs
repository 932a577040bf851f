fn main() {
    std::process::exit(rahmc::cli::run());
}
