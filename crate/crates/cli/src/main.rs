fn main() {
    std::process::exit(rl_cli::run(std::env::args_os()));
}
