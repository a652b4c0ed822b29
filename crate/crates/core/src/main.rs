fn main() {
    std::process::exit(cocontrast::cli::run(std::env::args_os()));
}
