fn main() {
    std::process::exit(tpcheck::cli::run());
}
