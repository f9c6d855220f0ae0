//! A minimal append-only ledger holding crop forecasts.
//!
//! Every forecast becomes one `addPrediction` call in its own block. Blocks
//! and transactions are hashed with Keccak-256 over fixed big-endian
//! encodings, and [`Chain::verify_chain`] replays the whole history against
//! the stored contract state.

pub mod chain;
pub mod codec;
pub mod hash;
pub mod record;
pub mod store;

pub use chain::{
    call_gas, tx_root, Block, Chain, ChainConfig, LedgerError, Receipt, StagedBlock, Transaction,
    Violation, ViolationKind, CONTRACT_NAME,
};
pub use codec::{
    add_prediction_selector, decode_add_prediction, encode_add_prediction, CodecError,
    ADD_PREDICTION_SIGNATURE,
};
pub use hash::{decode_hex, encode_hex, keccak256, Address, HexError, H256};
pub use record::{from_fixed, render_fixed, to_fixed, FixedPointError, PredictionRecord};
pub use store::{
    load_chain, load_chain_unverified, read_chain, read_chain_unverified, save_chain, write_chain,
    ChainWriter, StoreError,
};
