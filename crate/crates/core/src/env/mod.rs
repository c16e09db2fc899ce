//! Latency-aware exchange holding the agent's own orders.
//!
//! Market depth is represented only by the top-of-book stream. Submissions
//! and cancellations take effect after a configurable delay; an order rests
//! until the best opposing quote reaches its limit price and then fills in
//! full at that price.
//!
//! Events sharing a millisecond run activations first (in request order),
//! then the tick, so a cancellation effective at `t` beats a fill at `t`.

mod session;

pub use session::{
    run_event_loop, DecisionView, EpisodeStats, QuoteAction, QuotingPolicy, Session, SessionConfig,
    SessionOutcome,
};

use crate::accounting::Fill;
use crate::types::{Side, Tick};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub submit_ms: i64,
    pub cancel_ms: i64,
}

impl LatencyConfig {
    pub fn new(submit_ms: i64, cancel_ms: i64) -> Self {
        LatencyConfig { submit_ms, cancel_ms }
    }
}

/// When the opposing quote counts as reaching a limit price.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillRule {
    /// Bid fills when `ask <= price`; ask fills when `bid >= price`.
    #[default]
    Inclusive,
    /// Bid fills when `ask < price`; ask fills when `bid > price`.
    Strict,
}

impl FillRule {
    /// Whether `top` executes (or, at arrival, would immediately execute)
    /// an order at `price` on `side`.
    pub fn crosses(self, side: Side, price: f64, top: &Tick) -> bool {
        match (self, side) {
            (FillRule::Inclusive, Side::Bid) => top.best_ask <= price,
            (FillRule::Inclusive, Side::Ask) => top.best_bid >= price,
            (FillRule::Strict, Side::Bid) => top.best_ask < price,
            (FillRule::Strict, Side::Ask) => top.best_bid > price,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OrderStatus {
    Pending,
    Open,
    Cancelling,
    Closed,
}

impl OrderStatus {
    pub const ALL: [OrderStatus; 4] = [
        OrderStatus::Pending,
        OrderStatus::Open,
        OrderStatus::Cancelling,
        OrderStatus::Closed,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OrderStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OrderStatus::Pending => "PENDING",
            OrderStatus::Open => "OPEN",
            OrderStatus::Cancelling => "CANCELLING",
            OrderStatus::Closed => "CLOSED",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloseReason {
    Rejected,
    Canceled,
    Filled,
}

/// Whether `from -> to` (closing with `reason`) is an edge of the lifecycle graph.
pub fn is_allowed_transition(from: OrderStatus, to: OrderStatus, reason: Option<CloseReason>) -> bool {
    use CloseReason as R;
    use OrderStatus as S;
    matches!(
        (from, to, reason),
        (S::Pending, S::Open, None)
            | (S::Pending, S::Closed, Some(R::Rejected))
            | (S::Open, S::Cancelling, None)
            | (S::Open, S::Closed, Some(R::Filled))
            | (S::Cancelling, S::Closed, Some(R::Canceled))
            | (S::Cancelling, S::Closed, Some(R::Filled))
    )
}

/// One unit-size limit order of the agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentOrder {
    pub id: u64,
    pub side: Side,
    pub price: f64,
    pub size: f64,
    pub status: OrderStatus,
    pub submit_effective_at: i64,
    pub cancel_effective_at: Option<i64>,
    pub close_reason: Option<CloseReason>,
    /// Set when the order must be withdrawn as soon as it reaches the exchange.
    pub cancel_on_arrival: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Submit,
    Activate,
    Reject,
    CancelRequest,
    Cancel,
    /// A cancellation reached the exchange after its order had filled.
    CancelFailed,
    Fill,
}

/// One line of the environment trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub at_ms: i64,
    pub kind: TraceKind,
    pub order_id: u64,
    pub side: Side,
    /// `None` for the record creating the order.
    pub status_before: Option<OrderStatus>,
    pub status_after: OrderStatus,
    pub price: f64,
    pub fill: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<CloseReason>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnvError {
    #[error("{side} side already has live order {order_id}")]
    SideBusy { side: Side, order_id: u64 },
    #[error("{side} side has no OPEN order to cancel")]
    NothingToCancel { side: Side },
    #[error("order price must be positive and finite, got {0}")]
    BadPrice(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum ActivationKind {
    Submit,
    Cancel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Activation {
    at_ms: i64,
    seq: u64,
    kind: ActivationKind,
    side_index: usize,
    order_id: u64,
}

/// Order slots, activation queue and the last processed top of book.
#[derive(Clone, Debug)]
pub struct Exchange {
    latency: LatencyConfig,
    rule: FillRule,
    slots: [Option<AgentOrder>; 2],
    queue: BinaryHeap<Reverse<Activation>>,
    next_seq: u64,
    next_order_id: u64,
    top: Option<Tick>,
    trace: Vec<TraceRecord>,
    record_trace: bool,
}

impl Exchange {
    pub fn new(latency: LatencyConfig, rule: FillRule) -> Self {
        Exchange {
            latency,
            rule,
            slots: [None, None],
            queue: BinaryHeap::new(),
            next_seq: 0,
            next_order_id: 1,
            top: None,
            trace: Vec::new(),
            record_trace: true,
        }
    }

    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }

    pub fn latency(&self) -> LatencyConfig {
        self.latency
    }

    pub fn order(&self, side: Side) -> Option<&AgentOrder> {
        self.slots[side.index()].as_ref()
    }

    /// Status of the side's current order; `Closed` when there is none.
    pub fn status(&self, side: Side) -> OrderStatus {
        self.order(side).map_or(OrderStatus::Closed, |o| o.status)
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    pub fn top(&self) -> Option<&Tick> {
        self.top.as_ref()
    }

    fn record(&mut self, at_ms: i64, kind: TraceKind, side: Side, before: Option<OrderStatus>, fill: bool) {
        if !self.record_trace {
            return;
        }
        let o = self.slots[side.index()].as_ref().expect("recorded order exists");
        self.trace.push(TraceRecord {
            at_ms,
            kind,
            order_id: o.id,
            side,
            status_before: before,
            status_after: o.status,
            price: o.price,
            fill,
            reason: o.close_reason,
        });
    }

    fn schedule(&mut self, at_ms: i64, kind: ActivationKind, side: Side, order_id: u64) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Activation {
            at_ms,
            seq,
            kind,
            side_index: side.index(),
            order_id,
        }));
    }

    /// Sends a new order; it stays PENDING until `now + L_submit`.
    pub fn submit(&mut self, side: Side, price: f64, now_ms: i64) -> Result<u64, EnvError> {
        if !(price > 0.0 && price.is_finite()) {
            return Err(EnvError::BadPrice(price));
        }
        if let Some(o) = self.order(side) {
            if o.status != OrderStatus::Closed {
                return Err(EnvError::SideBusy { side, order_id: o.id });
            }
        }
        let id = self.next_order_id;
        self.next_order_id += 1;
        let at = now_ms + self.latency.submit_ms;
        self.slots[side.index()] = Some(AgentOrder {
            id,
            side,
            price,
            size: 1.0,
            status: OrderStatus::Pending,
            submit_effective_at: at,
            cancel_effective_at: None,
            close_reason: None,
            cancel_on_arrival: false,
        });
        self.record(now_ms, TraceKind::Submit, side, None, false);
        self.schedule(at, ActivationKind::Submit, side, id);
        Ok(id)
    }

    /// Asks for an OPEN order to be withdrawn at `now + L_cancel`. The order
    /// can still fill until then.
    pub fn request_cancel(&mut self, side: Side, now_ms: i64) -> Result<(), EnvError> {
        let at = now_ms + self.latency.cancel_ms;
        let order = match self.slots[side.index()].as_mut() {
            Some(o) if o.status == OrderStatus::Open => o,
            _ => return Err(EnvError::NothingToCancel { side }),
        };
        order.status = OrderStatus::Cancelling;
        order.cancel_effective_at = Some(at);
        let id = order.id;
        self.record(now_ms, TraceKind::CancelRequest, side, Some(OrderStatus::Open), false);
        self.schedule(at, ActivationKind::Cancel, side, id);
        Ok(())
    }

    fn close(&mut self, side: Side, reason: CloseReason, at_ms: i64, kind: TraceKind) {
        let o = self.slots[side.index()].as_mut().expect("closing order exists");
        let before = o.status;
        o.status = OrderStatus::Closed;
        o.close_reason = Some(reason);
        self.record(at_ms, kind, side, Some(before), kind == TraceKind::Fill);
    }

    fn activate(&mut self, a: Activation) {
        let side = Side::BOTH[a.side_index];
        let Some(order) = self.slots[a.side_index].as_ref() else {
            return;
        };
        if order.id != a.order_id {
            return;
        }
        match a.kind {
            ActivationKind::Submit => {
                let valid = match &self.top {
                    Some(top) => !self.rule.crosses(side, order.price, top),
                    None => false,
                };
                if !valid {
                    self.close(side, CloseReason::Rejected, a.at_ms, TraceKind::Reject);
                    return;
                }
                let withdraw = order.cancel_on_arrival;
                self.slots[a.side_index].as_mut().expect("order exists").status = OrderStatus::Open;
                self.record(a.at_ms, TraceKind::Activate, side, Some(OrderStatus::Pending), false);
                if withdraw {
                    self.withdraw_open(side, a.at_ms);
                }
            }
            ActivationKind::Cancel => match order.status {
                OrderStatus::Cancelling => {
                    self.close(side, CloseReason::Canceled, a.at_ms, TraceKind::Cancel);
                }
                OrderStatus::Closed if order.close_reason == Some(CloseReason::Filled) => {
                    self.record(a.at_ms, TraceKind::CancelFailed, side, Some(OrderStatus::Closed), false);
                }
                _ => {}
            },
        }
    }

    fn withdraw_open(&mut self, side: Side, at_ms: i64) {
        let o = self.slots[side.index()].as_mut().expect("order exists");
        o.status = OrderStatus::Cancelling;
        o.cancel_effective_at = Some(at_ms);
        self.record(at_ms, TraceKind::CancelRequest, side, Some(OrderStatus::Open), false);
        self.close(side, CloseReason::Canceled, at_ms, TraceKind::Cancel);
    }

    /// Runs every activation due at or before `now_ms`.
    pub fn process_due(&mut self, now_ms: i64) {
        while let Some(Reverse(a)) = self.queue.peek().copied() {
            if a.at_ms > now_ms {
                break;
            }
            self.queue.pop();
            self.activate(a);
        }
    }

    /// Advances to `tick`: due activations first, then the execution check
    /// for OPEN and CANCELLING orders.
    pub fn on_tick(&mut self, tick: &Tick) -> Vec<Fill> {
        self.process_due(tick.timestamp_ms);
        self.top = Some(*tick);
        let mut fills = Vec::new();
        for side in Side::BOTH {
            let Some(o) = self.order(side) else { continue };
            let live = matches!(o.status, OrderStatus::Open | OrderStatus::Cancelling);
            if live && self.rule.crosses(side, o.price, tick) {
                fills.push(Fill {
                    side,
                    price: o.price,
                    qty: o.size,
                    at_ms: tick.timestamp_ms,
                });
                self.close(side, CloseReason::Filled, tick.timestamp_ms, TraceKind::Fill);
            }
        }
        fills
    }

    /// Withdraws everything without latency: OPEN and CANCELLING orders
    /// close as canceled now, PENDING orders are withdrawn on arrival.
    pub fn force_cancel_all(&mut self, now_ms: i64) {
        for side in Side::BOTH {
            match self.status(side) {
                OrderStatus::Open => self.withdraw_open(side, now_ms),
                OrderStatus::Cancelling => {
                    self.close(side, CloseReason::Canceled, now_ms, TraceKind::Cancel);
                }
                OrderStatus::Pending => {
                    self.slots[side.index()].as_mut().expect("order exists").cancel_on_arrival = true;
                }
                OrderStatus::Closed => {}
            }
        }
    }
}
