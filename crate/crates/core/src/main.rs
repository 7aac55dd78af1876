fn main() {
    std::process::exit(channel_euler::cli::main_with(std::env::args_os()));
}
