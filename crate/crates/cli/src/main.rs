fn main() {
    let code = qnipm_cli::run(std::env::args_os());
    std::process::exit(code);
}
