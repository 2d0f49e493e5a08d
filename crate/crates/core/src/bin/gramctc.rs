fn main() {
    let code = gram_ctc::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
