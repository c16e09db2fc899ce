//! From-scratch book oracle: a flat list of live orders in arrival order,
//! rebuilt by replaying the snapshot and every message so far.

use hftmm_core::book::{BookConfig, LevelView, OrderBook};
use hftmm_core::feed::{BookSnapshot, DoneReason, Level3Message, MsgType, SnapshotOrder};
use hftmm_core::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Price and size units of the generated streams.
const CENT: f64 = 100.0;

#[derive(Clone, Debug)]
struct Live {
    id: String,
    side: Side,
    cents: i64,
    lots: i64,
}

/// Prices are cents and sizes are hundredths, held as integers.
#[derive(Clone, Debug, Default)]
pub struct NaiveBook {
    orders: Vec<Live>,
    filled_out: Vec<String>,
    last_sequence: u64,
    strict: bool,
}

fn cents(x: f64) -> i64 {
    (x * CENT).round() as i64
}

impl NaiveBook {
    pub fn replay(snapshot: &BookSnapshot, messages: &[Level3Message], strict: bool) -> Self {
        let mut b = NaiveBook {
            last_sequence: snapshot.sequence,
            strict,
            ..Default::default()
        };
        for (side, list) in [(Side::Bid, &snapshot.bids), (Side::Ask, &snapshot.asks)] {
            for o in list {
                b.orders.push(Live {
                    id: o.order_id.clone(),
                    side,
                    cents: cents(o.price),
                    lots: cents(o.size),
                });
            }
        }
        for m in messages {
            b.apply(m);
        }
        b
    }

    fn find(&self, id: &str) -> Option<usize> {
        self.orders.iter().position(|o| o.id == id)
    }

    fn apply(&mut self, m: &Level3Message) {
        if m.sequence <= self.last_sequence {
            return;
        }
        self.last_sequence = m.sequence;
        match m.msg_type {
            MsgType::Received => {}
            MsgType::Open => {
                let p = cents(m.price);
                let crosses = self.orders.iter().any(|o| match m.side {
                    Side::Bid => o.side == Side::Ask && o.cents <= p,
                    Side::Ask => o.side == Side::Bid && o.cents >= p,
                });
                if self.find(&m.order_id).is_none() && !crosses {
                    self.orders.push(Live {
                        id: m.order_id.clone(),
                        side: m.side,
                        cents: p,
                        lots: cents(m.size),
                    });
                }
            }
            MsgType::Done => {
                if let Some(i) = self.find(&m.order_id) {
                    self.orders.remove(i);
                } else if let Some(j) = self.filled_out.iter().position(|x| *x == m.order_id) {
                    self.filled_out.remove(j);
                }
            }
            MsgType::Match => {
                let Some(i) = self.find(&m.order_id) else { return };
                let want = cents(m.size);
                if want > self.orders[i].lots && self.strict {
                    return;
                }
                if want >= self.orders[i].lots {
                    let o = self.orders.remove(i);
                    self.filled_out.push(o.id);
                } else {
                    self.orders[i].lots -= want;
                }
            }
        }
    }

    /// Aggregated `(cents, hundredths)` levels, best first.
    pub fn levels(&self, side: Side) -> Vec<(i64, i64)> {
        self.ladder(side)
            .into_iter()
            .map(|l| (l.price_ticks / 1_000_000, l.orders.iter().map(|o| o.1).sum::<i64>() / 1_000_000))
            .collect()
    }

    /// Levels best first, each with its orders in arrival order. Prices in
    /// the book's fixed-point units (1e-8), sizes likewise.
    pub fn ladder(&self, side: Side) -> Vec<LevelView> {
        let mut prices: Vec<i64> = self.orders.iter().filter(|o| o.side == side).map(|o| o.cents).collect();
        prices.sort_unstable();
        prices.dedup();
        if side == Side::Bid {
            prices.reverse();
        }
        prices
            .into_iter()
            .map(|c| LevelView {
                price_ticks: c * 1_000_000,
                orders: self
                    .orders
                    .iter()
                    .filter(|o| o.side == side && o.cents == c)
                    .map(|o| (o.id.clone(), o.lots * 1_000_000))
                    .collect(),
            })
            .collect()
    }
}

/// A snapshot around 100.00 and up to `max_len` messages mixing valid
/// events with stale, duplicate, crossing, unknown and oversize ones.
pub fn random_stream(seed: u64, max_len: usize) -> (BookSnapshot, Vec<Level3Message>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_id = 0u32;
    let mut fresh = |prefix: &str| {
        next_id += 1;
        format!("{prefix}{next_id}")
    };
    let mut snap = BookSnapshot {
        sequence: 100,
        ..Default::default()
    };
    for _ in 0..rng.gen_range(0..8) {
        snap.bids.push(SnapshotOrder {
            order_id: fresh("s"),
            price: rng.gen_range(9_990..10_000) as f64 / CENT,
            size: rng.gen_range(1..500) as f64 / CENT,
        });
    }
    for _ in 0..rng.gen_range(0..8) {
        snap.asks.push(SnapshotOrder {
            order_id: fresh("s"),
            price: rng.gen_range(10_001..10_011) as f64 / CENT,
            size: rng.gen_range(1..500) as f64 / CENT,
        });
    }
    let mut ids: Vec<(String, Side, i64)> = snap
        .bids
        .iter()
        .map(|o| (o.order_id.clone(), Side::Bid, cents(o.price)))
        .chain(snap.asks.iter().map(|o| (o.order_id.clone(), Side::Ask, cents(o.price))))
        .collect();
    let n = rng.gen_range(1..=max_len);
    let mut seq = snap.sequence;
    let mut msgs = Vec::with_capacity(n);
    for _ in 0..n {
        seq += 1;
        let sequence = if rng.gen_bool(0.03) { seq.saturating_sub(rng.gen_range(1..5)) } else { seq };
        let side = if rng.gen_bool(0.5) { Side::Bid } else { Side::Ask };
        let known = (!ids.is_empty()).then(|| ids[rng.gen_range(0..ids.len())].clone());
        let roll = rng.gen_range(0..100);
        let (msg_type, order_id, side, price_c, size_c) = match roll {
            0..=39 => {
                let p = match side {
                    Side::Bid => rng.gen_range(9_985..10_003),
                    Side::Ask => rng.gen_range(9_998..10_016),
                };
                // Occasionally reuse a live id.
                let id = match (&known, rng.gen_bool(0.03)) {
                    (Some(k), true) => k.0.clone(),
                    _ => fresh("o"),
                };
                ids.push((id.clone(), side, p));
                (MsgType::Open, id, side, p, rng.gen_range(1..500))
            }
            40..=64 => match &known {
                Some(k) if rng.gen_bool(0.95) => (MsgType::Match, k.0.clone(), k.1, k.2, rng.gen_range(1..400)),
                _ => (MsgType::Match, fresh("u"), side, 10_000, 10),
            },
            65..=89 => match &known {
                Some(k) if rng.gen_bool(0.9) => (MsgType::Done, k.0.clone(), k.1, k.2, rng.gen_range(0..100)),
                _ => (MsgType::Done, fresh("u"), side, 10_000, 0),
            },
            _ => (MsgType::Received, fresh("r"), side, 10_000, 10),
        };
        msgs.push(Level3Message {
            sequence,
            timestamp_ms: seq as i64,
            msg_type,
            order_id,
            side,
            price: price_c as f64 / CENT,
            size: size_c as f64 / CENT,
            reason: (msg_type == MsgType::Done).then(|| {
                if rng.gen_bool(0.7) {
                    DoneReason::Canceled
                } else {
                    DoneReason::Filled
                }
            }),
            exchange_ts_ms: None,
        });
    }
    (snap, msgs)
}

/// Applies the stream incrementally and, after every message, compares the
/// book with a from-scratch replay of the prefix. Returns the first mismatch.
pub fn check_stream(seed: u64, max_len: usize, strict: bool) -> Result<usize, String> {
    let (snap, msgs) = random_stream(seed, max_len);
    let config = BookConfig {
        strict,
        ..Default::default()
    };
    let mut book = OrderBook::from_snapshot(&snap, config).map_err(|e| e.to_string())?;
    for k in 0..msgs.len() {
        let _ = book.apply(&msgs[k]);
        let oracle = NaiveBook::replay(&snap, &msgs[..=k], strict);
        for side in Side::BOTH {
            if book.ladder_view(side) != oracle.ladder(side) {
                return Err(format!("seed {seed} message {k}: {side} ladder differs"));
            }
        }
        book.check_invariants().map_err(|e| format!("seed {seed} message {k}: {e}"))?;
    }
    Ok(msgs.len())
}
