fn main() {
    std::process::exit(ppg_qpr::cli::run(std::env::args_os()));
}
