//! Level-3 order book rebuilt from a snapshot plus the message stream.
//!
//! Prices and sizes are stored as fixed-point integers so that level identity
//! and size arithmetic are exact. The precision is configurable.

use crate::feed::{BookSnapshot, Level3Message, MsgType, SnapshotError};
use crate::types::{Side, Tick};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub price_decimals: u32,
    pub size_decimals: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            price_decimals: 8,
            size_decimals: 8,
        }
    }
}

impl Precision {
    pub fn price_to_ticks(&self, price: f64) -> i64 {
        (price * 10f64.powi(self.price_decimals as i32)).round() as i64
    }

    pub fn ticks_to_price(&self, ticks: i64) -> f64 {
        ticks as f64 / 10f64.powi(self.price_decimals as i32)
    }

    pub fn size_to_lots(&self, size: f64) -> i64 {
        (size * 10f64.powi(self.size_decimals as i32)).round() as i64
    }

    pub fn lots_to_size(&self, lots: i64) -> f64 {
        lots as f64 / 10f64.powi(self.size_decimals as i32)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookConfig {
    pub precision: Precision,
    /// Escalate integrity anomalies (unknown ids, oversize matches, crossing
    /// opens) to errors instead of warnings.
    pub strict: bool,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BookError {
    #[error("invalid snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("message {sequence}: {warning}")]
    Integrity { sequence: u64, warning: BookWarning },
    #[error("{side} side holds {available} < requested {requested}")]
    SideExhausted {
        side: Side,
        requested: f64,
        available: f64,
    },
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BookWarning {
    #[error("done for unknown order {0}")]
    UnknownDone(String),
    #[error("match against unknown order {0}")]
    UnknownMatch(String),
    #[error("match of {requested} lots exceeds resting {resting} lots on {order_id}; clamped")]
    OversizeMatch {
        order_id: String,
        requested: i64,
        resting: i64,
    },
    #[error("open {0} would cross the book; skipped")]
    CrossingOpen(String),
    #[error("open repeats live order id {0}; skipped")]
    DuplicateOpen(String),
}

/// What applying a message did.
#[derive(Clone, Debug, PartialEq)]
pub enum ApplyOutcome {
    Applied,
    /// Sequence at or below the book's last sequence; discarded.
    Stale,
    /// Applied with an anomaly (non-strict mode only).
    Warned(BookWarning),
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Level {
    orders: VecDeque<(String, i64)>,
    total: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderBook {
    config: BookConfig,
    bids: BTreeMap<i64, Level>,
    asks: BTreeMap<i64, Level>,
    index: HashMap<String, (Side, i64)>,
    /// Orders emptied by a match whose `done` has not arrived yet.
    filled_out: HashSet<String>,
    last_sequence: u64,
}

/// Canonical view of one price level, best first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelView {
    pub price_ticks: i64,
    pub orders: Vec<(String, i64)>,
}

impl OrderBook {
    pub fn new(config: BookConfig) -> Self {
        OrderBook {
            config,
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            index: HashMap::new(),
            filled_out: HashSet::new(),
            last_sequence: 0,
        }
    }

    pub fn from_snapshot(snapshot: &BookSnapshot, config: BookConfig) -> Result<Self, BookError> {
        snapshot.validate()?;
        let mut book = OrderBook::new(config);
        for (side, orders) in [(Side::Bid, &snapshot.bids), (Side::Ask, &snapshot.asks)] {
            for o in orders {
                let px = config.precision.price_to_ticks(o.price);
                let lots = config.precision.size_to_lots(o.size);
                book.insert(side, px, o.order_id.clone(), lots);
            }
        }
        book.last_sequence = snapshot.sequence;
        Ok(book)
    }

    pub fn config(&self) -> &BookConfig {
        &self.config
    }

    pub fn last_sequence(&self) -> u64 {
        self.last_sequence
    }

    pub fn order_count(&self) -> usize {
        self.index.len()
    }

    fn ladder_mut(&mut self, side: Side) -> &mut BTreeMap<i64, Level> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    fn ladder(&self, side: Side) -> &BTreeMap<i64, Level> {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn insert(&mut self, side: Side, px: i64, id: String, lots: i64) {
        self.index.insert(id.clone(), (side, px));
        let level = self.ladder_mut(side).entry(px).or_default();
        level.orders.push_back((id, lots));
        level.total += lots;
    }

    fn remove(&mut self, id: &str) -> Option<i64> {
        let (side, px) = self.index.remove(id)?;
        let ladder = self.ladder_mut(side);
        let level = ladder.get_mut(&px).expect("indexed level exists");
        let pos = level
            .orders
            .iter()
            .position(|(oid, _)| oid == id)
            .expect("indexed order exists");
        let (_, lots) = level.orders.remove(pos).expect("position valid");
        level.total -= lots;
        if level.orders.is_empty() {
            ladder.remove(&px);
        }
        Some(lots)
    }

    fn best_ticks(&self, side: Side) -> Option<i64> {
        match side {
            Side::Bid => self.bids.keys().next_back().copied(),
            Side::Ask => self.asks.keys().next().copied(),
        }
    }

    pub fn best_bid(&self) -> Option<f64> {
        self.best_ticks(Side::Bid)
            .map(|p| self.config.precision.ticks_to_price(p))
    }

    pub fn best_ask(&self) -> Option<f64> {
        self.best_ticks(Side::Ask)
            .map(|p| self.config.precision.ticks_to_price(p))
    }

    pub fn best(&self, side: Side) -> Option<f64> {
        match side {
            Side::Bid => self.best_bid(),
            Side::Ask => self.best_ask(),
        }
    }

    /// Top of book, when both sides are populated.
    pub fn top(&self, timestamp_ms: i64) -> Option<Tick> {
        Some(Tick {
            timestamp_ms,
            best_bid: self.best_bid()?,
            best_ask: self.best_ask()?,
        })
    }

    fn anomaly(&self, sequence: u64, warning: BookWarning) -> Result<ApplyOutcome, BookError> {
        if self.config.strict {
            Err(BookError::Integrity { sequence, warning })
        } else {
            log::debug!("message {sequence}: {warning}");
            Ok(ApplyOutcome::Warned(warning))
        }
    }

    /// Applies one stream message.
    ///
    /// In strict mode an anomaly leaves the book unchanged except for the
    /// sequence number, which still advances.
    pub fn apply(&mut self, msg: &Level3Message) -> Result<ApplyOutcome, BookError> {
        if msg.sequence <= self.last_sequence {
            return Ok(ApplyOutcome::Stale);
        }
        self.last_sequence = msg.sequence;
        let prec = self.config.precision;
        match msg.msg_type {
            MsgType::Received => Ok(ApplyOutcome::Applied),
            MsgType::Open => {
                if self.index.contains_key(&msg.order_id) {
                    return self.anomaly(msg.sequence, BookWarning::DuplicateOpen(msg.order_id.clone()));
                }
                let px = prec.price_to_ticks(msg.price);
                let crosses = match msg.side {
                    Side::Bid => self.best_ticks(Side::Ask).is_some_and(|a| px >= a),
                    Side::Ask => self.best_ticks(Side::Bid).is_some_and(|b| px <= b),
                };
                if crosses {
                    return self.anomaly(msg.sequence, BookWarning::CrossingOpen(msg.order_id.clone()));
                }
                self.insert(msg.side, px, msg.order_id.clone(), prec.size_to_lots(msg.size));
                Ok(ApplyOutcome::Applied)
            }
            MsgType::Done => {
                if self.remove(&msg.order_id).is_some() || self.filled_out.remove(&msg.order_id) {
                    Ok(ApplyOutcome::Applied)
                } else {
                    // Orders opened before the snapshot scope may legitimately be unknown.
                    self.anomaly(msg.sequence, BookWarning::UnknownDone(msg.order_id.clone()))
                }
            }
            MsgType::Match => {
                let Some(&(side, px)) = self.index.get(&msg.order_id) else {
                    return self.anomaly(msg.sequence, BookWarning::UnknownMatch(msg.order_id.clone()));
                };
                let requested = prec.size_to_lots(msg.size);
                let level = self.ladder_mut(side).get_mut(&px).expect("indexed level exists");
                let entry = level
                    .orders
                    .iter_mut()
                    .find(|(oid, _)| *oid == msg.order_id)
                    .expect("indexed order exists");
                let resting = entry.1;
                if requested > resting {
                    let warning = BookWarning::OversizeMatch {
                        order_id: msg.order_id.clone(),
                        requested,
                        resting,
                    };
                    if self.config.strict {
                        return Err(BookError::Integrity {
                            sequence: msg.sequence,
                            warning,
                        });
                    }
                    self.remove(&msg.order_id);
                    self.filled_out.insert(msg.order_id.clone());
                    log::debug!("message {}: {warning}", msg.sequence);
                    return Ok(ApplyOutcome::Warned(warning));
                }
                entry.1 -= requested;
                level.total -= requested;
                if resting == requested {
                    self.remove(&msg.order_id);
                    self.filled_out.insert(msg.order_id.clone());
                }
                Ok(ApplyOutcome::Applied)
            }
        }
    }

    /// Price of the level at which cumulative quantity from the best level
    /// first reaches `quantity`.
    pub fn depth_price_at_quantity(&self, side: Side, quantity: f64) -> Result<f64, BookError> {
        let prec = self.config.precision;
        let want = prec.size_to_lots(quantity);
        let mut cum = 0i64;
        let mut visit = |px: i64, level: &Level| -> Option<f64> {
            cum += level.total;
            (cum >= want).then(|| prec.ticks_to_price(px))
        };
        let found = match side {
            Side::Bid => self.bids.iter().rev().find_map(|(p, l)| visit(*p, l)),
            Side::Ask => self.asks.iter().find_map(|(p, l)| visit(*p, l)),
        };
        found.ok_or_else(|| BookError::SideExhausted {
            side,
            requested: quantity,
            available: self.side_quantity(side),
        })
    }

    /// Resting quantity at levels within relative distance `distance` of the
    /// best same-side price (inclusive).
    pub fn quantity_within_distance(&self, side: Side, distance: f64) -> f64 {
        let Some(best) = self.best_ticks(side) else {
            return 0.0;
        };
        // Relative comparison carried out on integer ticks; the small slack
        // absorbs the rounding of `distance * best`.
        let limit = distance * best as f64 * (1.0 + 1e-12);
        let within = |px: &i64| ((px - best).abs() as f64) <= limit;
        let lots: i64 = match side {
            Side::Bid => self
                .bids
                .iter()
                .rev()
                .take_while(|(p, _)| within(p))
                .map(|(_, l)| l.total)
                .sum(),
            Side::Ask => self
                .asks
                .iter()
                .take_while(|(p, _)| within(p))
                .map(|(_, l)| l.total)
                .sum(),
        };
        self.config.precision.lots_to_size(lots)
    }

    pub fn side_quantity(&self, side: Side) -> f64 {
        let lots: i64 = self.ladder(side).values().map(|l| l.total).sum();
        self.config.precision.lots_to_size(lots)
    }

    /// Aggregated `(price, quantity)` levels, best first.
    pub fn levels(&self, side: Side) -> Vec<(f64, f64)> {
        let prec = self.config.precision;
        let conv = |(p, l): (&i64, &Level)| (prec.ticks_to_price(*p), prec.lots_to_size(l.total));
        match side {
            Side::Bid => self.bids.iter().rev().map(conv).collect(),
            Side::Ask => self.asks.iter().map(conv).collect(),
        }
    }

    /// Every level with its FIFO queue, best first.
    pub fn ladder_view(&self, side: Side) -> Vec<LevelView> {
        let conv = |(p, l): (&i64, &Level)| LevelView {
            price_ticks: *p,
            orders: l.orders.iter().cloned().collect(),
        };
        match side {
            Side::Bid => self.bids.iter().rev().map(conv).collect(),
            Side::Ask => self.asks.iter().map(conv).collect(),
        }
    }

    /// Checks structural invariants; returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if let (Some(b), Some(a)) = (self.best_ticks(Side::Bid), self.best_ticks(Side::Ask)) {
            if b >= a {
                return Err(format!("crossed: bid {b} >= ask {a}"));
            }
        }
        let mut seen = 0usize;
        for side in Side::BOTH {
            for (px, level) in self.ladder(side) {
                if level.orders.is_empty() {
                    return Err(format!("empty level {px} kept on {side}"));
                }
                let sum: i64 = level.orders.iter().map(|(_, s)| s).sum();
                if sum != level.total {
                    return Err(format!("level {px} total {} != sum {sum}", level.total));
                }
                for (id, lots) in &level.orders {
                    if *lots <= 0 {
                        return Err(format!("order {id} has size {lots}"));
                    }
                    if self.index.get(id) != Some(&(side, *px)) {
                        return Err(format!("order {id} not indexed at {side} {px}"));
                    }
                    seen += 1;
                }
            }
        }
        if seen != self.index.len() {
            return Err(format!("index has {} ids, ladders hold {seen}", self.index.len()));
        }
        Ok(())
    }
}
