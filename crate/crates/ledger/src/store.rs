//! JSON Lines persistence. The first line carries the configuration; every
//! following line is one block together with the predictions it appended.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Block, Chain, ChainConfig, Violation};
use crate::record::PredictionRecord;

pub const CHAIN_FORMAT: &str = "cropchain-chain";
pub const CHAIN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("chain file corrupt at byte {offset} (line {line}): {reason}")]
    Corrupt {
        offset: u64,
        line: usize,
        reason: String,
    },
    #[error("chain file failed verification: {0}")]
    Tampered(Violation),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    format: String,
    version: u32,
    config: ChainConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockLine {
    block: Block,
    state: Vec<PredictionRecord>,
}

#[derive(Serialize)]
struct BlockLineRef<'a> {
    block: &'a Block,
    state: &'a [PredictionRecord],
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

fn block_states(chain: &Chain) -> impl Iterator<Item = (&Block, &[PredictionRecord])> {
    let state = chain.contract_state();
    let mut next = 0usize;
    chain.blocks().iter().map(move |b| {
        let end = (next + b.transactions.len()).min(state.len());
        let slice = &state[next.min(end)..end];
        next = end;
        (b, slice)
    })
}

pub fn write_chain<W: Write>(chain: &Chain, mut w: W) -> io::Result<()> {
    write_line(
        &mut w,
        &HeaderLine {
            format: CHAIN_FORMAT.into(),
            version: CHAIN_FORMAT_VERSION,
            config: chain.config().clone(),
        },
    )?;
    for (block, state) in block_states(chain) {
        write_line(&mut w, &BlockLineRef { block, state })?;
    }
    w.flush()
}

/// Parses a chain and verifies it; any verification failure is reported as
/// [`StoreError::Tampered`].
pub fn read_chain<R: Read>(r: R) -> Result<Chain, StoreError> {
    let chain = read_chain_unverified(r)?;
    chain.verify_chain().map_err(StoreError::Tampered)?;
    Ok(chain)
}

/// Parses a chain without auditing it. Use this to inspect a file that
/// [`read_chain`] rejects as tampered.
pub fn read_chain_unverified<R: Read>(r: R) -> Result<Chain, StoreError> {
    let mut reader = BufReader::new(r);
    let mut buf = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    let mut config = None;
    let mut blocks = Vec::new();
    let mut predictions = Vec::new();

    loop {
        buf.clear();
        let read = reader.read_until(b'\n', &mut buf)?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let corrupt = |reason: String| StoreError::Corrupt {
            offset,
            line: line_no,
            reason,
        };
        if buf.last() != Some(&b'\n') {
            return Err(corrupt("truncated line".into()));
        }
        let body = &buf[..buf.len() - 1];
        match config {
            None => {
                let h: HeaderLine =
                    serde_json::from_slice(body).map_err(|e| corrupt(e.to_string()))?;
                if h.format != CHAIN_FORMAT {
                    return Err(corrupt(format!(
                        "format `{}` is not {CHAIN_FORMAT}",
                        h.format
                    )));
                }
                if h.version != CHAIN_FORMAT_VERSION {
                    return Err(corrupt(format!(
                        "version {} is not supported (expected {CHAIN_FORMAT_VERSION})",
                        h.version
                    )));
                }
                config = Some(h.config);
            }
            Some(_) => {
                let l: BlockLine =
                    serde_json::from_slice(body).map_err(|e| corrupt(e.to_string()))?;
                if l.state.len() != l.block.transactions.len() {
                    return Err(corrupt(format!(
                        "block {} has {} transactions but {} state records",
                        l.block.number,
                        l.block.transactions.len(),
                        l.state.len()
                    )));
                }
                blocks.push(l.block);
                predictions.extend(l.state);
            }
        }
        offset += read as u64;
    }

    let config = config.ok_or(StoreError::Corrupt {
        offset: 0,
        line: 0,
        reason: "empty chain file".into(),
    })?;
    if blocks.is_empty() {
        return Err(StoreError::Corrupt {
            offset,
            line: line_no,
            reason: "no genesis block".into(),
        });
    }
    Ok(Chain::from_parts(config, blocks, predictions))
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<Chain, StoreError> {
    read_chain(File::open(path)?)
}

pub fn load_chain_unverified(path: impl AsRef<Path>) -> Result<Chain, StoreError> {
    read_chain_unverified(File::open(path)?)
}

pub fn save_chain(chain: &Chain, path: impl AsRef<Path>) -> io::Result<()> {
    write_chain(chain, BufWriter::new(File::create(path)?))
}

/// Append handle on a chain file. Each block is written as one line and
/// flushed before `append` returns.
pub struct ChainWriter {
    file: File,
}

impl ChainWriter {
    /// Opens `path`, creating it from `fresh` if absent, and returns the
    /// verified chain together with a writer positioned at its end.
    pub fn open_or_create(
        path: impl AsRef<Path>,
        fresh: impl FnOnce() -> Chain,
    ) -> Result<(Chain, Self), StoreError> {
        let path = path.as_ref();
        let chain = if path.exists() {
            load_chain(path)?
        } else {
            let chain = fresh();
            save_chain(&chain, path)?;
            chain
        };
        Ok((chain, Self::open_append(path)?))
    }

    /// Opens an existing chain file for appending without reading it.
    pub fn open_append(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self { file })
    }

    pub fn append(&mut self, block: &Block, state: &[PredictionRecord]) -> io::Result<()> {
        let mut line = serde_json::to_vec(&BlockLineRef { block, state })?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()
    }

    /// Appends the chain's tip block and the predictions it added.
    pub fn append_tip(&mut self, chain: &Chain) -> io::Result<()> {
        let (block, state) = block_states(chain)
            .last()
            .expect("chain always holds genesis");
        self.append(block, state)
    }
}
