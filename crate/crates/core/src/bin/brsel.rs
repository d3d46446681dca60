fn main() {
    std::process::exit(prophet_select::cli::main_with_args(std::env::args_os()));
}
