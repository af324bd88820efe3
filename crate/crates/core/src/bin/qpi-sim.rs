use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qpi_sim::experiment::{run, Command, LoadedConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    RunQpi,
    RunQapi,
    VerifyBlockenc,
    CostReport,
    CollectSamples,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::RunQpi => Command::RunQpi,
            Cmd::RunQapi => Command::RunQapi,
            Cmd::VerifyBlockenc => Command::VerifyBlockenc,
            Cmd::CostReport => Command::CostReport,
            Cmd::CollectSamples => Command::CollectSamples,
        }
    }
}

/// Simulated quantum policy iteration experiments.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Cmd,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seeds; overrides the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let result = LoadedConfig::from_file(&cli.config).and_then(|cfg| run(command, &cfg, &cli.out, cli.seeds));
    match result {
        Ok((records, summary)) => {
            for r in records.iter().filter(|r| r.error.is_some()) {
                eprintln!("error\tseed={}\t{}", r.seed, r.error.as_deref().unwrap_or_default());
            }
            println!(
                "{}\truns={}\tsucceeded={}\tout={}",
                command.name(),
                summary.runs,
                summary.successes,
                cli.out.display()
            );
            let failed = records.iter().any(|r| r.error.is_some())
                || (command == Command::VerifyBlockenc && summary.successes < summary.runs);
            if failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error\t{}\t{}", e.kind(), e.to_string().replace(['\n', '\t'], " "));
            ExitCode::from(2)
        }
    }
}
