fn main() {
    std::process::exit(rcpsp_core::harness::run(std::env::args_os()));
}
