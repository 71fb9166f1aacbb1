fn main() {
    std::process::exit(fmbs_bench::cli::run(std::env::args_os()));
}
