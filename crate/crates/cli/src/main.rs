fn main() {
    std::process::exit(spectradiag::main_with_args(std::env::args_os()));
}
