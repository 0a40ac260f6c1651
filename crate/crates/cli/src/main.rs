fn main() {
    std::process::exit(riverkpp_cli::main_with_args(std::env::args_os()));
}
