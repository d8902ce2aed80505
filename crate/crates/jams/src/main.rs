fn main() {
    std::process::exit(jams::cli::run(std::env::args_os()) as i32);
}
