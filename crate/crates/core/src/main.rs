fn main() -> std::process::ExitCode {
    icta::cli::main()
}
