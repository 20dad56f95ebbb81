fn main() -> std::process::ExitCode {
    hydrosense::cli::main()
}
