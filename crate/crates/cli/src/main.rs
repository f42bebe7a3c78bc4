fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(dcam_cli::run(&argv));
}
