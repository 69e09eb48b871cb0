fn main() {
    std::process::exit(lebdyn::run(std::env::args_os()));
}
