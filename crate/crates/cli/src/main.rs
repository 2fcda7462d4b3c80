fn main() {
    std::process::exit(beatmap_cli::run(std::env::args_os()));
}
