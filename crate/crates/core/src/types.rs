//! Types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Book side. A bid rests on the buy side, an ask on the sell side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Bid, Side::Ask];

    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }

    /// Slot index used by fixed-size per-side arrays.
    pub fn index(self) -> usize {
        match self {
            Side::Bid => 0,
            Side::Ask => 1,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Bid => f.write_str("bid"),
            Side::Ask => f.write_str("ask"),
        }
    }
}

/// Top-of-book observation: the environment's clock unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub timestamp_ms: i64,
    pub best_bid: f64,
    pub best_ask: f64,
}

/// Alias used where the reconstruction side of the code talks about quotes.
pub type TopOfBook = Tick;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TickError {
    #[error("non-positive quote at t={timestamp_ms}: bid {best_bid}, ask {best_ask}")]
    NonPositive {
        timestamp_ms: i64,
        best_bid: f64,
        best_ask: f64,
    },
    #[error("crossed or locked quote at t={timestamp_ms}: bid {best_bid} >= ask {best_ask}")]
    Crossed {
        timestamp_ms: i64,
        best_bid: f64,
        best_ask: f64,
    },
}

impl Tick {
    pub fn new(timestamp_ms: i64, best_bid: f64, best_ask: f64) -> Result<Self, TickError> {
        let tick = Tick {
            timestamp_ms,
            best_bid,
            best_ask,
        };
        tick.validate()?;
        Ok(tick)
    }

    pub fn validate(&self) -> Result<(), TickError> {
        if !(self.best_bid > 0.0 && self.best_ask > 0.0) {
            return Err(TickError::NonPositive {
                timestamp_ms: self.timestamp_ms,
                best_bid: self.best_bid,
                best_ask: self.best_ask,
            });
        }
        if self.best_bid >= self.best_ask {
            return Err(TickError::Crossed {
                timestamp_ms: self.timestamp_ms,
                best_bid: self.best_bid,
                best_ask: self.best_ask,
            });
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.best_bid + self.best_ask)
    }

    /// Relative spread `(ask - bid) / bid`.
    pub fn relative_spread(&self) -> f64 {
        (self.best_ask - self.best_bid) / self.best_bid
    }

    /// Best quote on `side`.
    pub fn best(&self, side: Side) -> f64 {
        match side {
            Side::Bid => self.best_bid,
            Side::Ask => self.best_ask,
        }
    }
}
