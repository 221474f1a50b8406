use std::process::ExitCode;

use tracing::Level;

fn main() -> ExitCode {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let verbose = args.iter().filter(|a| *a == "-v" || *a == "--verbose").count()
        + args
            .iter()
            .filter_map(|a| a.to_str())
            .filter(|a| a.starts_with("-vv"))
            .map(|a| a.len() - 1)
            .sum::<usize>();
    let level = match verbose {
        0 => Level::WARN,
        1 => Level::INFO,
        2 => Level::DEBUG,
        _ => Level::TRACE,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();

    match std::panic::catch_unwind(|| houseplan::cli::run(args)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(2)
        }
    }
}
