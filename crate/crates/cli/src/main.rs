fn main() {
    std::process::exit(riskagg_cli::commands::main_with_args(std::env::args_os()));
}
