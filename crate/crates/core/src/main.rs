fn main() {
    std::process::exit(stairnav::harness::run_cli());
}
