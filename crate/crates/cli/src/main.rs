use anyhow::Result;
use clap::Parser;

use groupward_cli::cli::{Cli, Command};
use groupward_cli::commands;

#[tokio::main]
async fn main() -> Result<()> {
    let cli = Cli::parse();
    init_tracing();
    match cli.command {
        Command::Score(args) => commands::score::run(args).await,
        Command::Audit(args) => commands::audit::run(args).await,
        Command::Stability(args) => commands::stability::run(args).await,
        Command::Serve(args) => commands::serve::run(args).await,
        Command::MockJudge(args) => commands::mock_judge::run(args).await,
    }
}

fn init_tracing() {
    use tracing_subscriber::EnvFilter;
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}
