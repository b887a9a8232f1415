fn main() -> std::process::ExitCode {
    ecgvit::cli::main()
}
