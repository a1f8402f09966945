fn main() {
    std::process::exit(cnre_bench::cli::run(std::env::args_os()));
}
