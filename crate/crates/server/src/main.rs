use std::net::SocketAddr;

use clap::Parser;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "gesture-server", version, about = "Serve the gesture pipeline over HTTP/JSON")]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8750", env = "GESTURE_BIND")]
    bind: SocketAddr,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    gesture_server::serve(listener, Default::default()).await?;
    Ok(())
}
