fn main() {
    std::process::exit(roughfrob_cli::main_with_args(std::env::args_os()));
}
