fn main() {
    std::process::exit(swipt_ee::cli::run(std::env::args_os()));
}
