fn main() {
    std::process::exit(rsk::cli::run());
}
