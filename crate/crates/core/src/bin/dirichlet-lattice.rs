fn main() {
    std::process::exit(dirichlet_lattice::cli::run(std::env::args_os()));
}
