fn main() {
    std::process::exit(featmap::cli::run(std::env::args_os()));
}
