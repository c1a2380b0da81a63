fn main() {
    std::process::exit(agentchess_core::cli::main_with_args(std::env::args_os()));
}
