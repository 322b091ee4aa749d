fn main() {
    std::process::exit(poisson_pca::cli::main_with_args(std::env::args_os()));
}
