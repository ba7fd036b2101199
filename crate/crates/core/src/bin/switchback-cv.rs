fn main() {
    std::process::exit(switchback_cv::cli::main_with_args(std::env::args_os()));
}
