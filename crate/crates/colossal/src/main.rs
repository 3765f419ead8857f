fn main() { std::process::exit(colossal::cli::run()); }
