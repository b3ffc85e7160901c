fn main() {
    std::process::exit(apriori_cli::main_with_args(std::env::args_os()));
}
