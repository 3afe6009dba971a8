fn main() {
    std::process::exit(nk_lagrangian::cli::run(std::env::args_os()));
}
