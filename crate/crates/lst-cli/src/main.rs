fn main() {
    std::process::exit(lst_cli::run(std::env::args_os()));
}
