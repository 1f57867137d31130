//! Start the HTTP service. Configure with BIND_ADDR, LOG_DIR and MAX_BODY_BYTES.
//!
//! ```text
//! cargo run --example serve
//! curl -s localhost:8080/sessions -d @session.json -H 'content-type: application/json'
//! ```

use posthoc::service::{serve, ServiceConfig};

#[tokio::main]
async fn main() -> posthoc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    serve(ServiceConfig::from_env()?).await
}
