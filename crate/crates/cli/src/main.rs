fn main() {
    std::process::exit(mlaudit_cli::run(std::env::args_os()));
}
