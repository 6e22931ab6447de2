use std::process::ExitCode;

use clap::Parser;
use varifold_lab::{error_exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            for c in out.report.premises.iter().chain(&out.report.conclusions) {
                let mark = if c.holds { "ok  " } else { "FAIL" };
                println!("{mark} {} = {:.6e} (bound {:.6e})", c.name, c.value, c.bound);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(out.outcome().exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
