fn main() {
    std::process::exit(adarnn::cli::run(std::env::args_os()));
}
