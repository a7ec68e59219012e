fn main() {
    std::process::exit(memvol::cli::run(std::env::args_os()));
}
