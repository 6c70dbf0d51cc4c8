fn main() -> std::process::ExitCode {
    endpointbench::cli::main()
}
