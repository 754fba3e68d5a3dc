use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = std::panic::catch_unwind(|| wsp4::cli::run(std::env::args_os()));
    match outcome {
        Ok(o) => {
            let _ = std::io::stdout().write_all(o.stdout.as_bytes());
            let _ = std::io::stderr().write_all(o.stderr.as_bytes());
            ExitCode::from(o.code as u8)
        }
        // The panic message has already been printed by the default hook.
        Err(_) => ExitCode::from(wsp4::cli::EXIT_INTERNAL as u8),
    }
}
