fn main() {
    std::process::exit(stresslab_cli::app::run(std::env::args_os()));
}
