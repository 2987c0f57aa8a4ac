//! Scripted mock judge server command.

use anyhow::Result;

use crate::cli::MockJudgeArgs;
use crate::mock_judge::{load_script, serve};

pub async fn run(args: MockJudgeArgs) -> Result<()> {
    let script = load_script(&args.script)?;
    let (addr, handle) = serve(script, &args.listen).await?;
    println!("listening on http://{addr}");
    handle.await?;
    Ok(())
}
