//! Serve forecasts over HTTP and query the endpoint once.

use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Duration;

use aeroadapt::checkpoint::{Forecaster, Predictor};
use aeroadapt::features::FeatureSchema;
use aeroadapt::impute::MiceConfig;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::nn::{ModelConfig, ModelParams, Task};
use aeroadapt::pipeline::prepare;
use aeroadapt::server::{serve, ForecastService};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn get(addr: std::net::SocketAddr, path: &str) -> std::io::Result<String> {
    let mut stream = std::net::TcpStream::connect(addr)?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")?;
    let mut body = String::new();
    stream.read_to_string(&mut body)?;
    Ok(body)
}

fn main() -> aeroadapt::Result<()> {
    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: 24 * 20,
        station_id: "riverside".into(),
        seed: 12,
        ..SyntheticConfig::default()
    })?;
    let schema = FeatureSchema::all_fields();
    let data = prepare(&masked, &schema, &MiceConfig::default())?;
    let cfg = ModelConfig {
        input_dim: schema.input_dim(),
        hidden_dim: 8,
        attention_dim: 4,
        task: Task::Regression,
        ..ModelConfig::default()
    };
    let model = Forecaster {
        predictor: Predictor::Network(ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(12))?),
        schema,
        normalizer: data.normalizer.clone(),
        imputer: data.imputer.clone(),
    };
    let service = Arc::new(ForecastService::new(model));
    service.set_buffer(masked);

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        tokio::spawn(serve(listener, service, None, Duration::from_secs(60)));
        let response = tokio::task::spawn_blocking(move || get(addr, "/forecast/riverside"))
            .await
            .expect("request thread")?;
        let body = response.split("\r\n\r\n").nth(1).unwrap_or_default();
        println!("{}", response.lines().next().unwrap_or_default());
        println!("{}", &body[..body.len().min(400)]);
        Ok(())
    })
}
