fn main() -> std::process::ExitCode {
    nsbandit::cli::main()
}
