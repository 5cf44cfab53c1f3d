fn main() {
    std::process::exit(delaydense_cli::run(std::env::args_os()));
}
