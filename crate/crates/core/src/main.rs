fn main() {
    std::process::exit(shiftscope::cli::dispatch(std::env::args_os()));
}
