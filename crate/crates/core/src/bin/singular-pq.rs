fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(singular_pq::cli::run(&args));
}
