//! Order-flow counters over trailing time windows of a message log.

use crate::book::Precision;
use crate::feed::{DoneReason, Level3Message, MsgType};
use crate::types::Side;
use serde::Serialize;

/// Aggregated flow over one window. Trades are attributed to the aggressor,
/// which is the side opposite the resting order named by the match.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FlowCounters {
    pub submitted_ask_qty: f64,
    pub submitted_bid_qty: f64,
    pub canceled_ask_qty: f64,
    pub canceled_bid_qty: f64,
    pub traded_buy_qty: f64,
    pub traded_sell_qty: f64,
    pub buy_trade_count: u64,
    pub sell_trade_count: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlowError {
    #[error("window starts at {window_start} ms, before the log start at {log_start} ms")]
    BeforeLogStart { window_start: i64, log_start: i64 },
    #[error("log is empty")]
    EmptyLog,
}

// Slot layout of the integer accumulators.
const SUB_ASK: usize = 0;
const SUB_BID: usize = 1;
const CXL_ASK: usize = 2;
const CXL_BID: usize = 3;
const BUY_QTY: usize = 4;
const SELL_QTY: usize = 5;
const BUY_N: usize = 6;
const SELL_N: usize = 7;

fn contribution(msg: &Level3Message, precision: &Precision) -> [i64; 8] {
    let mut c = [0i64; 8];
    let lots = precision.size_to_lots(msg.size);
    match (msg.msg_type, msg.side) {
        (MsgType::Open, Side::Ask) => c[SUB_ASK] = lots,
        (MsgType::Open, Side::Bid) => c[SUB_BID] = lots,
        (MsgType::Done, side) if msg.reason == Some(DoneReason::Canceled) => match side {
            Side::Ask => c[CXL_ASK] = lots,
            Side::Bid => c[CXL_BID] = lots,
        },
        // A resting ask is hit by a buyer; a resting bid by a seller.
        (MsgType::Match, Side::Ask) => {
            c[BUY_QTY] = lots;
            c[BUY_N] = 1;
        }
        (MsgType::Match, Side::Bid) => {
            c[SELL_QTY] = lots;
            c[SELL_N] = 1;
        }
        _ => {}
    }
    c
}

/// Prefix sums over a time-ordered log, answering window queries in
/// `O(log n)`.
#[derive(Clone, Debug)]
pub struct FlowIndex {
    precision: Precision,
    timestamps: Vec<i64>,
    prefix: Vec<[i64; 8]>,
}

impl FlowIndex {
    pub fn new(messages: &[Level3Message], precision: Precision) -> Self {
        let mut order: Vec<&Level3Message> = messages.iter().collect();
        order.sort_by_key(|m| m.timestamp_ms);
        let mut prefix = Vec::with_capacity(order.len() + 1);
        let mut acc = [0i64; 8];
        prefix.push(acc);
        for m in &order {
            let c = contribution(m, &precision);
            for (a, x) in acc.iter_mut().zip(c) {
                *a += x;
            }
            prefix.push(acc);
        }
        FlowIndex {
            precision,
            timestamps: order.iter().map(|m| m.timestamp_ms).collect(),
            prefix,
        }
    }

    pub fn log_start(&self) -> Option<i64> {
        self.timestamps.first().copied()
    }

    /// Counters over `[t - delta, t]`, both ends inclusive.
    pub fn window(&self, t: i64, delta_ms: i64) -> Result<FlowCounters, FlowError> {
        let log_start = self.log_start().ok_or(FlowError::EmptyLog)?;
        let start = t - delta_ms;
        if start < log_start {
            return Err(FlowError::BeforeLogStart {
                window_start: start,
                log_start,
            });
        }
        let lo = self.timestamps.partition_point(|&x| x < start);
        let hi = self.timestamps.partition_point(|&x| x <= t);
        let mut d = [0i64; 8];
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = self.prefix[hi][k] - self.prefix[lo.min(hi)][k];
        }
        Ok(self.to_counters(d))
    }

    fn to_counters(&self, d: [i64; 8]) -> FlowCounters {
        let q = |x: i64| self.precision.lots_to_size(x);
        FlowCounters {
            submitted_ask_qty: q(d[SUB_ASK]),
            submitted_bid_qty: q(d[SUB_BID]),
            canceled_ask_qty: q(d[CXL_ASK]),
            canceled_bid_qty: q(d[CXL_BID]),
            traded_buy_qty: q(d[BUY_QTY]),
            traded_sell_qty: q(d[SELL_QTY]),
            buy_trade_count: d[BUY_N] as u64,
            sell_trade_count: d[SELL_N] as u64,
        }
    }
}

/// Direct scan of the messages falling in `[t - delta, t]`.
pub fn flow_counters(
    messages: &[Level3Message],
    t: i64,
    delta_ms: i64,
) -> Result<FlowCounters, FlowError> {
    FlowIndex::new(messages, Precision::default()).window(t, delta_ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(ts: i64, t: MsgType, side: Side, size: f64, reason: Option<DoneReason>) -> Level3Message {
        Level3Message {
            sequence: ts as u64,
            timestamp_ms: ts,
            msg_type: t,
            order_id: format!("o{ts}"),
            side,
            price: 100.0,
            size,
            reason,
            exchange_ts_ms: None,
        }
    }

    #[test]
    fn empty_window_is_zero() {
        let log = vec![msg(0, MsgType::Open, Side::Bid, 1.0, None), msg(100, MsgType::Open, Side::Bid, 1.0, None)];
        assert_eq!(flow_counters(&log, 50, 10).unwrap(), FlowCounters::default());
    }

    #[test]
    fn match_on_resting_ask_is_a_buy() {
        let log = vec![msg(0, MsgType::Match, Side::Ask, 2.0, None)];
        let c = flow_counters(&log, 0, 0).unwrap();
        assert_eq!(c.traded_buy_qty, 2.0);
        assert_eq!(c.buy_trade_count, 1);
        assert_eq!(c.sell_trade_count, 0);
    }

    #[test]
    fn window_before_log_start_fails() {
        let log = vec![msg(1000, MsgType::Open, Side::Bid, 1.0, None)];
        assert_eq!(
            flow_counters(&log, 1000, 200),
            Err(FlowError::BeforeLogStart {
                window_start: 800,
                log_start: 1000
            })
        );
    }

    #[test]
    fn hand_counted_fixture() {
        let mut log = Vec::new();
        let mut ts = 0;
        for side in Side::BOTH {
            for _ in 0..3 {
                ts += 1;
                log.push(msg(ts, MsgType::Open, side, 1.5, None));
            }
            ts += 1;
            log.push(msg(ts, MsgType::Done, side, 0.5, Some(DoneReason::Canceled)));
            ts += 1;
            log.push(msg(ts, MsgType::Done, side, 0.0, Some(DoneReason::Filled)));
            ts += 1;
            log.push(msg(ts, MsgType::Received, side, 9.0, None));
        }
        let c = flow_counters(&log, ts, ts - 1).unwrap();
        assert_eq!(c.submitted_ask_qty, 4.5);
        assert_eq!(c.submitted_bid_qty, 4.5);
        assert_eq!(c.canceled_ask_qty, 0.5);
        assert_eq!(c.canceled_bid_qty, 0.5);
        assert_eq!(c.buy_trade_count + c.sell_trade_count, 0);
    }

    #[test]
    fn window_bounds_are_inclusive() {
        let log: Vec<_> = (0..=10).map(|t| msg(t * 10, MsgType::Open, Side::Ask, 1.0, None)).collect();
        let c = flow_counters(&log, 50, 20).unwrap();
        assert_eq!(c.submitted_ask_qty, 3.0);
    }
}
