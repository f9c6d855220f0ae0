use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_add_prediction, encode_add_prediction, CodecError};
use crate::hash::{hex_bytes, keccak256, Address, H256};
use crate::record::PredictionRecord;

pub const BASE_TX_GAS: u64 = 21_000;
pub const CALLDATA_BYTE_GAS: u64 = 16;
pub const STORAGE_WRITE_GAS: u64 = 20_000;

/// Name the default contract address is derived from.
pub const CONTRACT_NAME: &str = "CropPrediction";

/// Gas charged for one `addPrediction` call carrying `data_len` bytes of call data.
pub fn call_gas(data_len: usize) -> u64 {
    BASE_TX_GAS + CALLDATA_BYTE_GAS * data_len as u64 + STORAGE_WRITE_GAS
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub genesis_timestamp: u64,
    pub gas_price: u64,
    pub block_gas_limit: u64,
    pub contract: Address,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            genesis_timestamp: 1_710_969_512,
            gas_price: 20_000_000_000,
            block_gas_limit: 6_721_975,
            contract: Address::derived(CONTRACT_NAME),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub nonce: u64,
    pub gas_price: u64,
    pub gas_limit: u64,
    pub to: Address,
    pub value: u64,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    /// Recorded for nonce accounting; not part of the hashed encoding.
    pub sender: Address,
    pub hash: H256,
}

impl Transaction {
    pub fn new(
        nonce: u64,
        gas_price: u64,
        gas_limit: u64,
        to: Address,
        data: Vec<u8>,
        sender: Address,
    ) -> Self {
        let mut tx = Self {
            nonce,
            gas_price,
            gas_limit,
            to,
            value: 0,
            data,
            sender,
            hash: H256::zero(),
        };
        tx.hash = tx.compute_hash();
        tx
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + self.data.len());
        out.extend_from_slice(&self.nonce.to_be_bytes());
        out.extend_from_slice(&self.gas_price.to_be_bytes());
        out.extend_from_slice(&self.gas_limit.to_be_bytes());
        out.extend_from_slice(&self.to.0);
        out.extend_from_slice(&self.value.to_be_bytes());
        out.extend_from_slice(&(self.data.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn compute_hash(&self) -> H256 {
        keccak256(&self.canonical_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub number: u64,
    pub timestamp: u64,
    pub parent_hash: H256,
    pub tx_root: H256,
    pub gas_used: u64,
    pub gas_limit: u64,
    pub hash: H256,
    pub transactions: Vec<Transaction>,
}

impl Block {
    fn seal(
        number: u64,
        timestamp: u64,
        parent_hash: H256,
        transactions: Vec<Transaction>,
        gas_used: u64,
        gas_limit: u64,
    ) -> Self {
        let mut b = Self {
            number,
            timestamp,
            parent_hash,
            tx_root: tx_root(&transactions),
            gas_used,
            gas_limit,
            hash: H256::zero(),
            transactions,
        };
        b.hash = b.compute_hash();
        b
    }

    pub fn header_bytes(&self) -> [u8; 96] {
        let mut out = [0u8; 96];
        out[0..8].copy_from_slice(&self.number.to_be_bytes());
        out[8..16].copy_from_slice(&self.timestamp.to_be_bytes());
        out[16..48].copy_from_slice(&self.parent_hash.0);
        out[48..80].copy_from_slice(&self.tx_root.0);
        out[80..88].copy_from_slice(&self.gas_used.to_be_bytes());
        out[88..96].copy_from_slice(&self.gas_limit.to_be_bytes());
        out
    }

    pub fn compute_hash(&self) -> H256 {
        keccak256(&self.header_bytes())
    }
}

/// Keccak-256 over the concatenated transaction hashes; all zeros for an empty block.
pub fn tx_root(txs: &[Transaction]) -> H256 {
    if txs.is_empty() {
        return H256::zero();
    }
    let mut buf = Vec::with_capacity(32 * txs.len());
    for tx in txs {
        buf.extend_from_slice(&tx.hash.0);
    }
    keccak256(&buf)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("out of gas: call needs {required}, block limit is {limit}")]
    OutOfGas { required: u64, limit: u64 },
    #[error("timestamp {got} precedes the chain tip at {tip}")]
    Timestamp { got: u64, tip: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: H256,
    pub block_number: u64,
    pub block_hash: H256,
    pub gas_used: u64,
    pub prediction_id: u64,
}

/// A sealed block not yet appended; see [`Chain::stage_prediction`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagedBlock {
    pub block: Block,
    pub record: PredictionRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Numbering,
    Genesis,
    ParentLink,
    Timestamp,
    TransactionCount,
    TxHash,
    TxRoot,
    BlockHash,
    Gas,
    Recipient,
    Value,
    Nonce,
    CallData,
    State,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("block {block}: {kind:?}: {detail}")]
pub struct Violation {
    pub block: u64,
    pub kind: ViolationKind,
    pub detail: String,
}

fn violation(block: u64, kind: ViolationKind, detail: impl Into<String>) -> Violation {
    Violation {
        block,
        kind,
        detail: detail.into(),
    }
}

/// Append-only chain with a single contract whose only state is the ordered
/// list of stored predictions.
#[derive(Clone, PartialEq, Eq)]
pub struct Chain {
    config: ChainConfig,
    blocks: Vec<Block>,
    predictions: Vec<PredictionRecord>,
    nonces: BTreeMap<Address, u64>,
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chain")
            .field("blocks", &self.blocks.len())
            .field("predictions", &self.predictions.len())
            .finish()
    }
}

impl Chain {
    pub fn genesis(config: ChainConfig) -> Self {
        let genesis = Block::seal(
            0,
            config.genesis_timestamp,
            H256::zero(),
            Vec::new(),
            0,
            config.block_gas_limit,
        );
        Self {
            config,
            blocks: vec![genesis],
            predictions: Vec::new(),
            nonces: BTreeMap::new(),
        }
    }

    /// Rebuilds a chain from stored parts without checking it; call
    /// [`Chain::verify_chain`] before trusting the result.
    pub fn from_parts(
        config: ChainConfig,
        blocks: Vec<Block>,
        predictions: Vec<PredictionRecord>,
    ) -> Self {
        let mut nonces = BTreeMap::new();
        for tx in blocks.iter().flat_map(|b| &b.transactions) {
            let next = nonces.entry(tx.sender).or_insert(0u64);
            *next = (*next).max(tx.nonce.saturating_add(1));
        }
        Self {
            config,
            blocks,
            predictions,
            nonces,
        }
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().number
    }

    pub fn contract_state(&self) -> &[PredictionRecord] {
        &self.predictions
    }

    pub fn prediction_count(&self) -> u64 {
        self.predictions.len() as u64
    }

    pub fn get_prediction(&self, id: u64) -> Option<&PredictionRecord> {
        usize::try_from(id)
            .ok()
            .and_then(|i| self.predictions.get(i))
    }

    pub fn next_nonce(&self, sender: &Address) -> u64 {
        self.nonces.get(sender).copied().unwrap_or(0)
    }

    /// Mutable access to the stored blocks, for integrity tests.
    #[doc(hidden)]
    pub fn blocks_mut(&mut self) -> &mut Vec<Block> {
        &mut self.blocks
    }

    /// Mutable access to the contract state, for integrity tests.
    #[doc(hidden)]
    pub fn contract_state_mut(&mut self) -> &mut Vec<PredictionRecord> {
        &mut self.predictions
    }

    /// Stores `rec` in a new single-transaction block. On error nothing changes.
    pub fn submit_prediction(
        &mut self,
        sender: Address,
        rec: &PredictionRecord,
        timestamp: u64,
    ) -> Result<Receipt, LedgerError> {
        let staged = self.stage_prediction(sender, rec, timestamp)?;
        Ok(self.commit(staged))
    }

    /// Builds the block that [`Chain::submit_prediction`] would append without
    /// changing the chain, so callers can persist it before committing.
    pub fn stage_prediction(
        &self,
        sender: Address,
        rec: &PredictionRecord,
        timestamp: u64,
    ) -> Result<StagedBlock, LedgerError> {
        let tip = self.tip();
        if timestamp < tip.timestamp {
            return Err(LedgerError::Timestamp {
                got: timestamp,
                tip: tip.timestamp,
            });
        }
        let data = encode_add_prediction(rec)?;
        let gas = call_gas(data.len());
        let limit = self.config.block_gas_limit;
        if gas > limit {
            return Err(LedgerError::OutOfGas {
                required: gas,
                limit,
            });
        }
        let nonce = self.next_nonce(&sender);
        let tx = Transaction::new(
            nonce,
            self.config.gas_price,
            limit,
            self.config.contract,
            data,
            sender,
        );
        Ok(StagedBlock {
            block: Block::seal(tip.number + 1, timestamp, tip.hash, vec![tx], gas, limit),
            record: rec.clone(),
        })
    }

    /// Appends a block staged against the current tip.
    ///
    /// # Panics
    /// If the chain has moved since `staged` was built.
    pub fn commit(&mut self, staged: StagedBlock) -> Receipt {
        assert_eq!(
            staged.block.parent_hash,
            self.tip().hash,
            "staged block is stale"
        );
        let tx = &staged.block.transactions[0];
        let receipt = Receipt {
            tx_hash: tx.hash,
            block_number: staged.block.number,
            block_hash: staged.block.hash,
            gas_used: staged.block.gas_used,
            prediction_id: self.predictions.len() as u64,
        };
        self.nonces.insert(tx.sender, tx.nonce + 1);
        self.blocks.push(staged.block);
        self.predictions.push(staged.record);
        receipt
    }

    /// Full audit: header hashes, links, numbering, timestamps, per-sender
    /// nonces, gas accounting and a replay of every call against the stored
    /// contract state. Returns the first violation found.
    pub fn verify_chain(&self) -> Result<(), Violation> {
        use ViolationKind::*;
        let cfg = &self.config;
        let mut nonces: BTreeMap<Address, u64> = BTreeMap::new();
        let mut replayed = 0usize;

        for (i, b) in self.blocks.iter().enumerate() {
            let n = b.number;
            if n != i as u64 {
                return Err(violation(n, Numbering, format!("expected number {i}")));
            }
            if b.gas_limit != cfg.block_gas_limit {
                return Err(violation(
                    n,
                    Gas,
                    format!(
                        "gas limit {} differs from configured {}",
                        b.gas_limit, cfg.block_gas_limit
                    ),
                ));
            }
            if i == 0 {
                if b.parent_hash != H256::zero()
                    || !b.transactions.is_empty()
                    || b.gas_used != 0
                    || b.timestamp != cfg.genesis_timestamp
                {
                    return Err(violation(
                        0,
                        Genesis,
                        "genesis must be empty, parentless and at the configured time",
                    ));
                }
            } else {
                let prev = &self.blocks[i - 1];
                if b.parent_hash != prev.hash {
                    return Err(violation(
                        n,
                        ParentLink,
                        format!(
                            "parent {} but block {} hashes to {}",
                            b.parent_hash,
                            i - 1,
                            prev.hash
                        ),
                    ));
                }
                if b.timestamp < prev.timestamp {
                    return Err(violation(
                        n,
                        Timestamp,
                        format!("{} precedes parent {}", b.timestamp, prev.timestamp),
                    ));
                }
                if b.transactions.len() != 1 {
                    return Err(violation(
                        n,
                        TransactionCount,
                        format!("{} transactions", b.transactions.len()),
                    ));
                }
            }

            let mut gas = 0u64;
            for tx in &b.transactions {
                let h = tx.compute_hash();
                if h != tx.hash {
                    return Err(violation(
                        n,
                        TxHash,
                        format!("stored {} recomputes to {h}", tx.hash),
                    ));
                }
                if tx.to != cfg.contract {
                    return Err(violation(
                        n,
                        Recipient,
                        format!("call to {} instead of {}", tx.to, cfg.contract),
                    ));
                }
                if tx.value != 0 {
                    return Err(violation(n, Value, format!("value {}", tx.value)));
                }
                if tx.gas_price != cfg.gas_price || tx.gas_limit != cfg.block_gas_limit {
                    return Err(violation(
                        n,
                        Gas,
                        "transaction gas terms differ from configuration",
                    ));
                }
                let expected = nonces.entry(tx.sender).or_insert(0);
                if tx.nonce != *expected {
                    return Err(violation(
                        n,
                        Nonce,
                        format!(
                            "sender {} nonce {} expected {}",
                            tx.sender, tx.nonce, expected
                        ),
                    ));
                }
                *expected += 1;
                gas += call_gas(tx.data.len());

                let rec = decode_add_prediction(&tx.data)
                    .map_err(|e| violation(n, CallData, e.to_string()))?;
                match self.predictions.get(replayed) {
                    Some(stored) if *stored == rec => {}
                    Some(_) => {
                        return Err(violation(
                            n,
                            State,
                            format!("stored prediction {replayed} differs from replay"),
                        ))
                    }
                    None => {
                        return Err(violation(
                            n,
                            State,
                            format!("prediction {replayed} missing from state"),
                        ))
                    }
                }
                replayed += 1;
            }
            let root = tx_root(&b.transactions);
            if root != b.tx_root {
                return Err(violation(
                    n,
                    TxRoot,
                    format!("stored {} recomputes to {root}", b.tx_root),
                ));
            }
            if gas != b.gas_used || gas > b.gas_limit {
                return Err(violation(
                    n,
                    Gas,
                    format!(
                        "gas used {} recomputes to {gas} (limit {})",
                        b.gas_used, b.gas_limit
                    ),
                ));
            }
            let h = b.compute_hash();
            if h != b.hash {
                return Err(violation(
                    n,
                    BlockHash,
                    format!("stored {} recomputes to {h}", b.hash),
                ));
            }
        }
        if replayed != self.predictions.len() {
            return Err(violation(
                self.height(),
                State,
                format!(
                    "state holds {} predictions, replay produced {replayed}",
                    self.predictions.len()
                ),
            ));
        }
        Ok(())
    }

    /// Concatenated header and transaction encodings of every block.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend_from_slice(&b.header_bytes());
            for tx in &b.transactions {
                out.extend_from_slice(&tx.canonical_bytes());
            }
        }
        out
    }
}
