fn main() {
    std::process::exit(dpq_bench::cli::main());
}
