fn main() -> std::process::ExitCode {
    mpqkd::cli::main()
}
