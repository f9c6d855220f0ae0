use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cropchain_ledger::{Address, ChainConfig};
use serde::{Deserialize, Serialize};

/// Runtime settings for `serve`. Every field has a default; a TOML file may
/// set any subset and command-line flags override both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub model: PathBuf,
    pub chain: PathBuf,
    pub report: PathBuf,
    pub static_dir: PathBuf,
    pub default_k: usize,
    /// Per-device smoothing window for ingested readings.
    pub window: usize,
    /// Seed the server-held sender address is derived from.
    pub sender: String,
    pub ledger: LedgerSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerSettings {
    pub genesis_timestamp: u64,
    pub gas_price: u64,
    pub block_gas_limit: u64,
    pub contract: Address,
}

impl Default for LedgerSettings {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            genesis_timestamp: c.genesis_timestamp,
            gas_price: c.gas_price,
            block_gas_limit: c.block_gas_limit,
            contract: c.contract,
        }
    }
}

impl From<&LedgerSettings> for ChainConfig {
    fn from(s: &LedgerSettings) -> Self {
        Self {
            genesis_timestamp: s.genesis_timestamp,
            gas_price: s.gas_price,
            block_gas_limit: s.block_gas_limit,
            contract: s.contract,
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            model: "model.json".into(),
            chain: "chain.jsonl".into(),
            report: "reports/report.json".into(),
            static_dir: "webui/dist".into(),
            default_k: 3,
            window: 1,
            sender: "cropchain-node".into(),
            ledger: LedgerSettings::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.default_k >= 1, "default_k must be >= 1");
        anyhow::ensure!(self.window >= 1, "window must be >= 1");
        anyhow::ensure!(!self.sender.is_empty(), "sender must not be empty");
        Ok(())
    }

    pub fn chain_config(&self) -> ChainConfig {
        (&self.ledger).into()
    }

    pub fn sender_address(&self) -> Address {
        Address::derived(&self.sender)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ServiceConfig::from_toml("default_k = 5\n[ledger]\ngas_price = 1\n").unwrap();
        assert_eq!(cfg.default_k, 5);
        assert_eq!(cfg.ledger.gas_price, 1);
        assert_eq!(cfg.ledger.block_gas_limit, 6_721_975);
        assert_eq!(cfg.model, PathBuf::from("model.json"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ServiceConfig::from_toml("colour = 1").is_err());
        assert!(ServiceConfig::from_toml("default_k = 0").is_err());
    }
}
