use std::process::ExitCode;

use clap::Parser;
use maskfuse_cli::args::Cli;
use maskfuse_cli::commands::dispatch;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.opts.json;
    match dispatch(cli) {
        Ok(out) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("output serializes"));
            } else if !out.text.is_empty() {
                println!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            if json {
                eprintln!("{}", err.to_json());
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
