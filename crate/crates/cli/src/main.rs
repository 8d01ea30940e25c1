fn main() {
    std::process::exit(clipgeom_cli::run(std::env::args()));
}
