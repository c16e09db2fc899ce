//! Level-3 message log and snapshot files.
//!
//! A recording is one `snapshot.json` plus an append-only `messages.jsonl`
//! with one message per line. Field order on disk is fixed by the struct
//! declaration order below.

mod coinbase;
mod recorder;
mod sources;

pub use recorder::{count_gaps, record_session, RecordingSummary, SegmentPaths};
pub use sources::{
    open_feed, open_snapshot, FeedSource, FileFeed, FileSnapshot, HttpSnapshot, ScriptedFeed,
    SnapshotSource, StaticSnapshot, WebSocketFeed,
};

use crate::types::Side;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MsgType {
    Received,
    Open,
    Done,
    Match,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoneReason {
    Canceled,
    Filled,
}

/// One exchange event.
///
/// For `match`, `order_id` and `side` describe the resting (maker) order and
/// `size` is the traded quantity. For `done`, `size` is the remaining
/// quantity removed from the book.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level3Message {
    pub sequence: u64,
    pub timestamp_ms: i64,
    pub msg_type: MsgType,
    pub order_id: String,
    pub side: Side,
    pub price: f64,
    pub size: f64,
    #[serde(default)]
    pub reason: Option<DoneReason>,
    /// Exchange-reported time. Stored for reference only; never used for ordering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange_ts_ms: Option<i64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MessageError {
    #[error("{msg_type:?} message {sequence} needs price > 0 and size > 0 (got {price}, {size})")]
    NonPositive {
        sequence: u64,
        msg_type: MsgType,
        price: f64,
        size: f64,
    },
    #[error("message {sequence} has negative or non-finite price/size")]
    Negative { sequence: u64 },
    #[error("done message {0} carries no reason")]
    MissingReason(u64),
    #[error("{msg_type:?} message {sequence} must not carry a reason")]
    UnexpectedReason { sequence: u64, msg_type: MsgType },
    #[error("message {0} has an empty order id")]
    EmptyOrderId(u64),
}

impl Level3Message {
    pub fn validate(&self) -> Result<(), MessageError> {
        let seq = self.sequence;
        if !(self.price.is_finite() && self.size.is_finite()) || self.price < 0.0 || self.size < 0.0
        {
            return Err(MessageError::Negative { sequence: seq });
        }
        if self.order_id.is_empty() {
            return Err(MessageError::EmptyOrderId(seq));
        }
        match self.msg_type {
            MsgType::Open | MsgType::Match => {
                if !(self.price > 0.0 && self.size > 0.0) {
                    return Err(MessageError::NonPositive {
                        sequence: seq,
                        msg_type: self.msg_type,
                        price: self.price,
                        size: self.size,
                    });
                }
            }
            _ => {}
        }
        match (self.msg_type, self.reason) {
            (MsgType::Done, None) => Err(MessageError::MissingReason(seq)),
            (MsgType::Done, Some(_)) => Ok(()),
            (_, Some(_)) => Err(MessageError::UnexpectedReason {
                sequence: seq,
                msg_type: self.msg_type,
            }),
            (_, None) => Ok(()),
        }
    }
}

/// One resting order inside a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotOrder {
    pub order_id: String,
    pub price: f64,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub sequence: u64,
    pub bids: Vec<SnapshotOrder>,
    pub asks: Vec<SnapshotOrder>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SnapshotError {
    #[error("snapshot is crossed: best bid {bid} >= best ask {ask}")]
    Crossed { bid: f64, ask: f64 },
    #[error("snapshot repeats order id {0}")]
    DuplicateId(String),
    #[error("snapshot order {0} has non-positive price or size")]
    NonPositive(String),
}

impl BookSnapshot {
    pub fn validate(&self) -> Result<(), SnapshotError> {
        let mut seen = HashSet::new();
        for o in self.bids.iter().chain(&self.asks) {
            if !(o.price > 0.0 && o.size > 0.0) {
                return Err(SnapshotError::NonPositive(o.order_id.clone()));
            }
            if !seen.insert(o.order_id.as_str()) {
                return Err(SnapshotError::DuplicateId(o.order_id.clone()));
            }
        }
        let best_bid = self.bids.iter().map(|o| o.price).fold(f64::NEG_INFINITY, f64::max);
        let best_ask = self.asks.iter().map(|o| o.price).fold(f64::INFINITY, f64::min);
        if best_bid >= best_ask {
            return Err(SnapshotError::Crossed {
                bid: best_bid,
                ask: best_ask,
            });
        }
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, FeedError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| FeedError::io(path, e))?;
        let snap: BookSnapshot = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| FeedError::Snapshot(format!("{}: {e}", path.display())))?;
        Ok(snap)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), FeedError> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| FeedError::io(path, e))?;
        serde_json::to_writer(&mut file, self).map_err(|e| FeedError::Snapshot(e.to_string()))?;
        file.write_all(b"\n").map_err(|e| FeedError::io(path, e))?;
        file.sync_all().map_err(|e| FeedError::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeedError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: sequence {sequence} does not increase (previous {previous})")]
    NonMonotone {
        line: usize,
        sequence: u64,
        previous: u64,
    },
    #[error("connection failed (retriable): {reason}; partial log kept")]
    Connection {
        reason: String,
        summary: Option<RecordingSummary>,
    },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("snapshot sequence {snapshot} is older than the buffered stream start {first_buffered}")]
    SnapshotOutOfRange { snapshot: u64, first_buffered: u64 },
    #[error("unsupported endpoint {0}")]
    UnsupportedEndpoint(String),
}

impl FeedError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FeedError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Whether re-connecting into a fresh segment may succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, FeedError::Connection { .. })
    }
}

/// Serialises one message as a log line (without trailing newline).
pub fn encode_line(msg: &Level3Message) -> String {
    serde_json::to_string(msg).expect("message serialisation cannot fail")
}

pub fn decode_line(line: &str, line_no: usize) -> Result<Level3Message, FeedError> {
    let msg: Level3Message = serde_json::from_str(line).map_err(|e| FeedError::Parse {
        line: line_no,
        reason: e.to_string(),
    })?;
    msg.validate().map_err(|e| FeedError::Parse {
        line: line_no,
        reason: e.to_string(),
    })?;
    Ok(msg)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReplayOptions {
    /// Accept sequences that fail to increase instead of erroring.
    pub permissive: bool,
}

/// Streaming reader over a message log.
pub struct LogReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    previous: Option<u64>,
    options: ReplayOptions,
    failed: bool,
}

impl<R: BufRead> LogReader<R> {
    pub fn new(reader: R, options: ReplayOptions) -> Self {
        LogReader {
            lines: reader.lines(),
            line_no: 0,
            previous: None,
            options,
            failed: false,
        }
    }
}

impl<R: BufRead> Iterator for LogReader<R> {
    type Item = Result<Level3Message, FeedError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(FeedError::Parse {
                        line: self.line_no + 1,
                        reason: e.to_string(),
                    }));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let result = decode_line(&line, self.line_no).and_then(|msg| {
                if let Some(prev) = self.previous {
                    if msg.sequence <= prev && !self.options.permissive {
                        return Err(FeedError::NonMonotone {
                            line: self.line_no,
                            sequence: msg.sequence,
                            previous: prev,
                        });
                    }
                }
                Ok(msg)
            });
            match &result {
                Ok(msg) => self.previous = Some(msg.sequence),
                Err(_) => self.failed = true,
            }
            return Some(result);
        }
    }
}

/// Opens a message log for replay in stored order.
pub fn replay_log(
    path: impl AsRef<Path>,
    options: ReplayOptions,
) -> Result<LogReader<BufReader<File>>, FeedError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FeedError::io(path, e))?;
    Ok(LogReader::new(BufReader::new(file), options))
}

/// Reads a whole log into memory.
pub fn read_log(path: impl AsRef<Path>, options: ReplayOptions) -> Result<Vec<Level3Message>, FeedError> {
    replay_log(path, options)?.collect()
}

/// Writes messages as a complete log file.
pub fn write_log(path: impl AsRef<Path>, messages: &[Level3Message]) -> Result<(), FeedError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FeedError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for m in messages {
        writeln!(w, "{}", encode_line(m)).map_err(|e| FeedError::io(path, e))?;
    }
    w.flush().map_err(|e| FeedError::io(path, e))?;
    Ok(())
}
