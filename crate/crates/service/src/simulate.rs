//! HTTP client side of the sensor simulator.

use std::time::Duration;

use cropchain_core::telemetry::{SensorMessage, Simulator};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub sent: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub failed: u64,
}

impl SimulationSummary {
    fn merge(&mut self, o: &Self) {
        self.sent += o.sent;
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.failed += o.failed;
    }
}

pub fn ingest_url(target: &str) -> String {
    format!("{}/api/v1/ingest", target.trim_end_matches('/'))
}

/// Posts `steps` messages to `target`'s ingest endpoint. Each device sends
/// its own messages in order from a separate task, paced so the fleet as a
/// whole emits `rate` messages per second.
pub async fn run_simulation(
    sim: &Simulator<'_, f64>,
    target: &str,
    steps: u64,
) -> anyhow::Result<SimulationSummary> {
    let cfg = sim.config();
    let devices = cfg.devices.max(1) as u64;
    let period = Duration::from_secs_f64(devices as f64 / cfg.rate);
    let url = ingest_url(target);
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(30))
        .build()?;

    let mut tasks = Vec::new();
    for d in 0..devices.min(steps) {
        let messages: Vec<SensorMessage> = (d..steps)
            .step_by(devices as usize)
            .map(|s| sim.generate_message(s))
            .collect();
        let (client, url) = (client.clone(), url.clone());
        tasks.push(tokio::spawn(async move {
            let mut out = SimulationSummary::default();
            let mut ticker = tokio::time::interval(period);
            for msg in messages {
                ticker.tick().await;
                out.sent += 1;
                match client.post(&url).json(&msg).send().await {
                    Ok(r) if r.status().is_success() => out.accepted += 1,
                    Ok(r) if r.status().as_u16() == 422 => out.rejected += 1,
                    Ok(r) => {
                        tracing::warn!(device = %msg.device_id, status = %r.status(), "ingest failed");
                        out.failed += 1;
                    }
                    Err(e) => {
                        tracing::warn!(device = %msg.device_id, "ingest request failed: {e}");
                        out.failed += 1;
                    }
                }
            }
            out
        }));
    }
    let mut total = SimulationSummary::default();
    for t in tasks {
        total.merge(&t.await?);
    }
    Ok(total)
}
