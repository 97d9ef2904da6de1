fn main() {
    std::process::exit(ddfilter::cli::run(std::env::args_os()));
}
