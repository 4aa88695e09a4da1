fn main() {
    std::process::exit(bpfactor::cli::run(std::env::args_os()));
}
