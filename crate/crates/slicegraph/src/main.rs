fn main() {
    std::process::exit(slicegraph::cli::run(std::env::args_os()));
}
