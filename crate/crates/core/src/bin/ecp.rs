fn main() {
    std::process::exit(energy_cp::cli::run(std::env::args_os()));
}
