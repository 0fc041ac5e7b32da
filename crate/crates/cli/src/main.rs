mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spim_core::view::RenderKind;

#[derive(Debug, Parser)]
#[command(name = "spim", version, about = "Partitioned MVC client/server tiers, mashups and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a server until interrupted.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fetch one key range through a client and render it.
    Query {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: String,
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        #[arg(long, default_value = "text")]
        render: RenderKind,
        /// Print the transaction's step ids to stderr, one per line.
        #[arg(long)]
        trace: bool,
    },
    /// Fetch several ranges, possibly from different servers, and render
    /// them as one view.
    Mashup {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `render` key.
        #[arg(long)]
        render: Option<RenderKind>,
    },
    /// Run the timing sweep and write table1.csv, table2.csv, plotdata.tsv.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides `outdir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a query repeatedly on an in-process deployment and print the
    /// tier counters.
    Stats {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        table: String,
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        #[arg(long, default_value_t = 2)]
        repeat: u32,
    },
    /// Recompute the published statistics from the shipped timing tables.
    VerifyFixtures,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Serve { config } => commands::serve(&config),
        Command::Query {
            config,
            table,
            from,
            to,
            render,
            trace,
        } => commands::query(&config, &table, from, to, render, trace),
        Command::Mashup { config, render } => commands::mashup(&config, render),
        Command::Bench { config, out } => commands::bench(config.as_deref(), out),
        Command::Stats {
            config,
            table,
            from,
            to,
            repeat,
        } => commands::stats(&config, &table, from, to, repeat),
        Command::VerifyFixtures => commands::verify_fixtures(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
