//! Tick CSV files (`timestamp_ms,best_bid,best_ask`).
//!
//! Reconstructed and simulated streams share this schema so every consumer
//! (calibration, backtests, predictor evaluation) reads one format.

use crate::types::{Tick, TickError};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum TickIoError {
    #[error("tick csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("tick csv row {row}: {source}")]
    Invalid { row: usize, source: TickError },
    #[error("tick csv row {row}: timestamp {timestamp_ms} goes backwards")]
    NonMonotone { row: usize, timestamp_ms: i64 },
}

pub fn read_ticks<R: Read>(reader: R) -> Result<Vec<Tick>, TickIoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<Tick> = Vec::new();
    for (i, rec) in rdr.deserialize::<Tick>().enumerate() {
        let row = i + 2;
        let tick = rec?;
        tick.validate()
            .map_err(|source| TickIoError::Invalid { row, source })?;
        if let Some(prev) = out.last() {
            if tick.timestamp_ms < prev.timestamp_ms {
                return Err(TickIoError::NonMonotone {
                    row,
                    timestamp_ms: tick.timestamp_ms,
                });
            }
        }
        out.push(tick);
    }
    Ok(out)
}

pub fn read_ticks_file(path: impl AsRef<Path>) -> Result<Vec<Tick>, TickIoError> {
    let file = std::fs::File::open(path.as_ref()).map_err(csv::Error::from)?;
    read_ticks(std::io::BufReader::new(file))
}

pub fn write_ticks<W: Write>(writer: W, ticks: &[Tick]) -> Result<(), TickIoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    // Header is written explicitly so an empty stream still yields a valid file.
    wtr.write_record(["timestamp_ms", "best_bid", "best_ask"])?;
    for t in ticks {
        wtr.write_record(&[
            t.timestamp_ms.to_string(),
            t.best_bid.to_string(),
            t.best_ask.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_ticks_file(path: impl AsRef<Path>, ticks: &[Tick]) -> Result<(), TickIoError> {
    let file = std::fs::File::create(path.as_ref()).map_err(csv::Error::from)?;
    write_ticks(std::io::BufWriter::new(file), ticks)
}

/// Index of the last tick with `timestamp_ms <= t`, if any.
pub fn last_at_or_before(ticks: &[Tick], t: i64) -> Option<usize> {
    let n = ticks.partition_point(|k| k.timestamp_ms <= t);
    n.checked_sub(1)
}
