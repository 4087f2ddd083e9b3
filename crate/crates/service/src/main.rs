use std::net::SocketAddr;

use apfit_service::{router, ServiceConfig};
use clap::Parser;

#[derive(Parser)]
#[command(
    name = "apfit-serve",
    version,
    about = "HTTP service for action potential model fitting"
)]
struct Args {
    /// Address to listen on; use 0.0.0.0:PORT to accept remote connections
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Maximum number of fits running at the same time
    #[arg(long, default_value_t = 1)]
    max_jobs: usize,
    /// Worker threads per fit (all cores by default)
    #[arg(long)]
    threads: Option<usize>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let app = router(ServiceConfig {
        max_concurrent_jobs: args.max_jobs,
        threads: args.threads,
    });
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    eprintln!("apfit-serve listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}
