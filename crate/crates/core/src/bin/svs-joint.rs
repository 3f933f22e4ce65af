fn main() {
    std::process::exit(svs_joint::cli::run(std::env::args_os()));
}
