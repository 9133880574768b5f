fn main() {
    std::process::exit(attrishield::cli::dispatch(std::env::args_os()));
}
