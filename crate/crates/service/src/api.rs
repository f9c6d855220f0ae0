//! Request handlers, independent of the HTTP layer.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use cropchain_core::models::{load_model, RankedPredictions};
use cropchain_core::telemetry::{
    validate_message, DeviceWindows, FieldRejection, SensorMessage, ValidationRule,
};
use cropchain_core::TrainedModel;
use cropchain_ledger::{
    decode_add_prediction, encode_hex, load_chain_unverified, render_fixed, save_chain, Address,
    Block, Chain, ChainWriter, PredictionRecord, Violation, H256,
};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;

pub const DEFAULT_PAGE: usize = 20;
pub const MAX_PAGE: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<FieldRejection>,
}

impl ApiError {
    fn new(status: u16, error: impl Into<String>) -> Self {
        Self {
            status,
            error: error.into(),
            reasons: Vec::new(),
        }
    }

    pub fn bad_request(error: impl Into<String>) -> Self {
        Self::new(400, error)
    }

    pub fn not_found(error: impl Into<String>) -> Self {
        Self::new(404, error)
    }

    pub fn unprocessable(error: impl Into<String>, reasons: Vec<FieldRejection>) -> Self {
        Self {
            status: 422,
            error: error.into(),
            reasons,
        }
    }

    pub fn internal(error: impl Into<String>) -> Self {
        Self::new(500, error)
    }
}

/// The seven readings, named as in sensor messages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Features {
    pub n: f64,
    pub p: f64,
    pub k: f64,
    pub temperature: f64,
    pub humidity: f64,
    pub ph: f64,
    pub rainfall: f64,
}

impl Features {
    pub fn values(&self) -> [f64; 7] {
        [
            self.n,
            self.p,
            self.k,
            self.temperature,
            self.humidity,
            self.ph,
            self.rainfall,
        ]
    }

    pub fn from_values(v: [f64; 7]) -> Self {
        Self {
            n: v[0],
            p: v[1],
            k: v[2],
            temperature: v[3],
            humidity: v[4],
            ph: v[5],
            rainfall: v[6],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub features: Features,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub record: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionInfo {
    pub tx_hash: H256,
    pub block_number: u64,
    pub block_hash: H256,
    pub prediction_index: u64,
    pub gas_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub predictions: RankedPredictions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transaction: Option<TransactionInfo>,
    /// Set when recording was requested but the ledger refused it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transaction_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub device_id: String,
    /// Readings after per-device smoothing; these are what got predicted and stored.
    pub features: Features,
    #[serde(flatten)]
    pub result: PredictResponse,
}

/// A stored record with fixed-point fields rendered to two decimals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordView {
    #[serde(rename = "cropName")]
    pub crop_name: String,
    pub n: String,
    pub p: String,
    pub k: String,
    pub ph: String,
    pub rain: String,
    pub temp: String,
    pub hum: String,
}

impl From<&PredictionRecord> for RecordView {
    fn from(r: &PredictionRecord) -> Self {
        Self {
            crop_name: r.crop_name.clone(),
            n: render_fixed(r.n),
            p: render_fixed(r.p),
            k: render_fixed(r.k),
            ph: render_fixed(r.ph),
            rain: render_fixed(r.rain),
            temp: render_fixed(r.temp),
            hum: render_fixed(r.hum),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionView {
    pub index: u64,
    pub block_number: u64,
    pub tx_hash: Option<H256>,
    #[serde(flatten)]
    pub record: RecordView,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionSummary {
    pub hash: H256,
    pub from: Address,
    pub to: Address,
    pub nonce: u64,
    pub gas_price: u64,
    pub data: String,
    /// The decoded call, when the data is a well-formed `addPrediction`.
    pub prediction: Option<RecordView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub number: u64,
    pub timestamp: u64,
    pub hash: H256,
    pub parent_hash: H256,
    pub gas_used: u64,
    pub gas_limit: u64,
    pub tx_count: usize,
    pub transactions: Vec<TransactionSummary>,
}

impl From<&Block> for BlockSummary {
    fn from(b: &Block) -> Self {
        Self {
            number: b.number,
            timestamp: b.timestamp,
            hash: b.hash,
            parent_hash: b.parent_hash,
            gas_used: b.gas_used,
            gas_limit: b.gas_limit,
            tx_count: b.transactions.len(),
            transactions: b
                .transactions
                .iter()
                .map(|tx| TransactionSummary {
                    hash: tx.hash,
                    from: tx.sender,
                    to: tx.to,
                    nonce: tx.nonce,
                    gas_price: tx.gas_price,
                    data: encode_hex(&tx.data),
                    prediction: decode_add_prediction(&tx.data)
                        .ok()
                        .as_ref()
                        .map(RecordView::from),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksPage {
    pub height: u64,
    pub blocks: Vec<BlockSummary>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyView {
    pub ok: bool,
    pub height: u64,
    pub predictions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounters {
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
    pub classes: usize,
    pub height: u64,
    pub predictions: u64,
    pub read_only: bool,
    pub ingest: IngestCounters,
}

struct Ledger {
    chain: Chain,
    writer: Option<ChainWriter>,
    /// Set when the chain failed verification on open; the ledger then refuses writes.
    alert: Option<Violation>,
}

/// Shared state behind every endpoint. The model is immutable; ledger writes
/// are serialised by the write lock while reads share it.
pub struct Service {
    model: TrainedModel,
    rules: ValidationRule,
    default_k: usize,
    sender: Address,
    report: Option<PathBuf>,
    ledger: RwLock<Ledger>,
    windows: Mutex<DeviceWindows<f64>>,
    accepted: AtomicU64,
    rejected: AtomicU64,
}

/// Settings for [`Service::new`] that are not the model or the chain.
#[derive(Clone, Debug)]
pub struct ServiceOptions {
    pub default_k: usize,
    pub window: usize,
    pub sender: Address,
    pub report: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        let cfg = ServiceConfig::default();
        Self {
            default_k: cfg.default_k,
            window: cfg.window,
            sender: cfg.sender_address(),
            report: None,
        }
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Service {
    /// Builds a service around an in-memory chain. With a writer, every new
    /// block is appended to it before being committed.
    pub fn new(
        model: TrainedModel,
        chain: Chain,
        writer: Option<ChainWriter>,
        opts: ServiceOptions,
    ) -> anyhow::Result<Self> {
        anyhow::ensure!(opts.default_k >= 1, "default k must be >= 1");
        let alert = chain.verify_chain().err();
        if let Some(v) = &alert {
            tracing::error!("tamper alert: {v}; ledger is read-only");
        }
        Ok(Self {
            model,
            rules: ValidationRule::default(),
            default_k: opts.default_k,
            sender: opts.sender,
            report: opts.report,
            ledger: RwLock::new(Ledger {
                chain,
                writer,
                alert,
            }),
            windows: Mutex::new(DeviceWindows::new(opts.window)?),
            accepted: AtomicU64::new(0),
            rejected: AtomicU64::new(0),
        })
    }

    /// Loads the model and chain named by `cfg`, creating a genesis-only
    /// chain file if none exists.
    pub fn open(cfg: &ServiceConfig) -> anyhow::Result<Self> {
        cfg.validate()?;
        let file = std::fs::File::open(&cfg.model)
            .with_context(|| format!("opening model {}", cfg.model.display()))?;
        let model: TrainedModel = load_model(std::io::BufReader::new(file))
            .with_context(|| format!("loading model {}", cfg.model.display()))?;
        let chain = if cfg.chain.exists() {
            load_chain_unverified(&cfg.chain)
                .with_context(|| format!("reading chain {}", cfg.chain.display()))?
        } else {
            let chain = Chain::genesis(cfg.chain_config());
            save_chain(&chain, &cfg.chain)
                .with_context(|| format!("creating chain {}", cfg.chain.display()))?;
            chain
        };
        if chain.config() != &cfg.chain_config() {
            tracing::warn!("chain file parameters differ from configuration; using the file's");
        }
        let writer = ChainWriter::open_append(&cfg.chain)?;
        Self::new(
            model,
            chain,
            Some(writer),
            ServiceOptions {
                default_k: cfg.default_k,
                window: cfg.window,
                sender: cfg.sender_address(),
                report: Some(cfg.report.clone()),
            },
        )
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    /// Read access to the chain for callers outside the HTTP layer.
    pub fn with_chain<R>(&self, f: impl FnOnce(&Chain) -> R) -> R {
        f(&self.ledger.read().expect("ledger lock poisoned").chain)
    }

    fn rank(&self, values: [f64; 7], k: Option<usize>) -> Result<RankedPredictions, ApiError> {
        let k = k.unwrap_or(self.default_k);
        if k == 0 {
            return Err(ApiError::unprocessable("k must be >= 1", Vec::new()));
        }
        let reading = self
            .rules
            .validate_values::<f64>(&values)
            .map_err(|r| ApiError::unprocessable("validation failed", r.reasons))?;
        self.model
            .predict_topk(&reading, k)
            .map_err(|e| ApiError::internal(e.to_string()))
    }

    /// Stores the top-ranked crop with the given raw readings.
    fn record(
        &self,
        predictions: &RankedPredictions,
        values: [f64; 7],
    ) -> Result<TransactionInfo, String> {
        let top = predictions.top().ok_or("no prediction to record")?;
        let rec = PredictionRecord::from_readings(top.label.clone(), values)
            .map_err(|e| e.to_string())?;
        let mut ledger = self.ledger.write().expect("ledger lock poisoned");
        if let Some(v) = &ledger.alert {
            return Err(format!("ledger is read-only after tamper alert ({v})"));
        }
        let timestamp = now_secs().max(ledger.chain.tip().timestamp);
        let staged = ledger
            .chain
            .stage_prediction(self.sender, &rec, timestamp)
            .map_err(|e| e.to_string())?;
        if let Some(w) = ledger.writer.as_mut() {
            w.append(&staged.block, std::slice::from_ref(&staged.record))
                .map_err(|e| format!("chain file write failed: {e}"))?;
        }
        let receipt = ledger.chain.commit(staged);
        Ok(TransactionInfo {
            tx_hash: receipt.tx_hash,
            block_number: receipt.block_number,
            block_hash: receipt.block_hash,
            prediction_index: receipt.prediction_id,
            gas_used: receipt.gas_used,
        })
    }

    fn respond(
        &self,
        predictions: RankedPredictions,
        values: [f64; 7],
        record: bool,
    ) -> PredictResponse {
        let (transaction, transaction_error) = if record {
            match self.record(&predictions, values) {
                Ok(tx) => (Some(tx), None),
                Err(e) => {
                    tracing::warn!("prediction not recorded: {e}");
                    (None, Some(e))
                }
            }
        } else {
            (None, None)
        };
        PredictResponse {
            predictions,
            transaction,
            transaction_error,
        }
    }

    pub fn handle_predict(&self, req: &PredictRequest) -> Result<PredictResponse, ApiError> {
        let values = req.features.values();
        let predictions = self.rank(values, req.k)?;
        Ok(self.respond(predictions, values, req.record))
    }

    /// Validates a sensor message, smooths it per device, predicts and records.
    pub fn handle_ingest(&self, msg: &SensorMessage) -> Result<IngestResponse, ApiError> {
        let reading = match validate_message::<f64>(msg, &self.rules) {
            Ok(r) => r,
            Err(rej) => {
                self.rejected.fetch_add(1, Ordering::Relaxed);
                tracing::warn!(device = %msg.device_id, codes = ?rej.codes(), "rejected sensor message");
                return Err(ApiError::unprocessable(
                    "sensor message rejected",
                    rej.reasons,
                ));
            }
        };
        self.accepted.fetch_add(1, Ordering::Relaxed);
        let smoothed = self
            .windows
            .lock()
            .expect("window lock poisoned")
            .push(&msg.device_id, reading)
            .to_array();
        let predictions = self.rank(smoothed, None)?;
        Ok(IngestResponse {
            device_id: msg.device_id.clone(),
            features: Features::from_values(smoothed),
            result: self.respond(predictions, smoothed, true),
        })
    }

    pub fn handle_get_prediction(&self, index: u64) -> Result<PredictionView, ApiError> {
        self.with_chain(|chain| {
            let rec = chain.get_prediction(index).ok_or_else(|| {
                ApiError::not_found(format!(
                    "no prediction {index} (count {})",
                    chain.prediction_count()
                ))
            })?;
            // one transaction per block, so prediction i sits in block i + 1
            let block_number = index + 1;
            let tx_hash = chain
                .blocks()
                .get(block_number as usize)
                .and_then(|b| b.transactions.first())
                .map(|tx| tx.hash);
            Ok(PredictionView {
                index,
                block_number,
                tx_hash,
                record: rec.into(),
            })
        })
    }

    /// Blocks numbered `from` and below, newest first. `from` defaults to the
    /// tip; a `from` above the tip yields an empty page.
    pub fn handle_chain_blocks(&self, from: Option<u64>, limit: Option<usize>) -> BlocksPage {
        let limit = limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
        self.with_chain(|chain| {
            let height = chain.height();
            let from = from.unwrap_or(height);
            let blocks = if from > height {
                Vec::new()
            } else {
                chain.blocks()[..=from as usize]
                    .iter()
                    .rev()
                    .take(limit)
                    .map(BlockSummary::from)
                    .collect()
            };
            BlocksPage { height, blocks }
        })
    }

    pub fn handle_verify(&self) -> VerifyView {
        self.with_chain(|chain| {
            let violation = chain.verify_chain().err();
            VerifyView {
                ok: violation.is_none(),
                height: chain.height(),
                predictions: chain.prediction_count(),
                violation,
            }
        })
    }

    /// The benchmark report file, verbatim.
    pub fn handle_report(&self) -> Result<String, ApiError> {
        let path = self
            .report
            .as_ref()
            .ok_or_else(|| ApiError::not_found("no report configured"))?;
        std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ApiError::not_found(format!(
                "no report at {}; run `cropchain bench`",
                path.display()
            )),
            _ => ApiError::internal(format!("reading {}: {e}", path.display())),
        })
    }

    pub fn health(&self) -> Health {
        let ledger = self.ledger.read().expect("ledger lock poisoned");
        Health {
            status: "ok".into(),
            model: self.model.algorithm().display_name().into(),
            classes: self.model.n_classes(),
            height: ledger.chain.height(),
            predictions: ledger.chain.prediction_count(),
            read_only: ledger.alert.is_some(),
            ingest: IngestCounters {
                accepted: self.accepted.load(Ordering::Relaxed),
                rejected: self.rejected.load(Ordering::Relaxed),
            },
        }
    }
}
