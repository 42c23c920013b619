fn main() -> std::process::ExitCode {
    morphsep::cli::main()
}
