fn main() {
    std::process::exit(longmem_gp_cli::main_with_args(std::env::args_os()));
}
