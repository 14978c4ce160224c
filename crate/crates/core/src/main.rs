fn main() {
    std::process::exit(countable_hmm::cli::run(std::env::args_os()));
}
