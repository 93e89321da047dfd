fn main() {
    std::process::exit(dae_stab::cli::main_with(std::env::args_os()));
}
