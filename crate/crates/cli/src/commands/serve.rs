//! HTTP service entry point.

use std::sync::Arc;

use anyhow::Result;

use crate::cli::ServeArgs;
use crate::commands::{http_gateway, pipeline_config, resolve_config};
use crate::service::{serve, AppState};

pub async fn run(args: ServeArgs) -> Result<()> {
    let mut config = resolve_config(&args.common)?;
    if let Some(listen) = &args.listen {
        config.listen = listen.clone();
    }
    config.validate()?;
    let digest = config.digest();
    tracing::info!(digest, listen = config.listen, "starting scoring service");

    let state = Arc::new(AppState::new(
        pipeline_config(&config),
        http_gateway(&config)?,
        digest,
        config.request_size_limit,
    ));
    let (addr, handle) = serve(state, &config.listen).await?;
    println!("listening on http://{addr}");
    handle.await?;
    Ok(())
}
