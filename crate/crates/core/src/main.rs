use std::process::ExitCode;

fn main() -> ExitCode {
    gridmarl::cli::main()
}
