fn main() {
    std::process::exit(lindtop::cli::main_entry());
}
