fn main() {
    std::process::exit(bayesopt::service::cli_main(std::env::args_os()));
}
