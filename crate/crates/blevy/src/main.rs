fn main() {
    std::process::exit(blevy::cli::run());
}
