fn main() {
    let code = rwmh_certify::cli::run(std::env::args_os());
    std::process::exit(code);
}
