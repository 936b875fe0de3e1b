fn main() {
    let (code, out) = ppstar::cli::run(std::env::args_os());
    print!("{out}");
    std::process::exit(code);
}
