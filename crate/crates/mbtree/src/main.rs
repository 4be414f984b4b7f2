use std::process::ExitCode;

fn main() -> ExitCode {
    mbtree::cli::run()
}
