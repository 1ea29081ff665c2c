use std::process::ExitCode;

fn main() -> ExitCode {
    match protbeam::cli::run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("protbeam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
