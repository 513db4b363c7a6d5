use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ebhmm_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.render().to_string().trim().to_string())),
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return fail(&CliError::Usage("--threads must be >= 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Usage(format!("cannot start {n} threads: {e}")));
        }
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let result = run(&cli, &mut lock).and_then(|()| lock.flush().map_err(CliError::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    // a closed pipe downstream (`| head`) is not a failure of ours
    if let CliError::Core(ebhmm_core::Error::Io(io)) = e {
        if io.kind() == std::io::ErrorKind::BrokenPipe {
            return ExitCode::SUCCESS;
        }
    }
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
