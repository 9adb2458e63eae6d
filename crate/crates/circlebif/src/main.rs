fn main() { std::process::exit(circlebif::cli::main_entry()); }
