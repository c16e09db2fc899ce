//! Tick-driven trading session: exchange, portfolio, per-tick rewards and
//! episode bookkeeping around a quoting policy.
//!
//! A side is offered to the policy on a tick only while its order is OPEN or
//! CLOSED. An episode starts flat and ends on the tick where inventory comes
//! back to zero; remaining orders are then withdrawn without latency and the
//! next episode begins with the following tick.

use super::{Exchange, FillRule, LatencyConfig, OrderStatus, TraceRecord};
use crate::accounting::{step_reward, Fill, Portfolio};
use crate::types::{Side, Tick};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub latency: LatencyConfig,
    #[serde(default)]
    pub fill_rule: FillRule,
    pub i_max: f64,
    /// Inventory penalty per unit per tick.
    pub lambda: f64,
    #[serde(default = "yes")]
    pub record_trace: bool,
}

fn yes() -> bool {
    true
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            latency: LatencyConfig::default(),
            fill_rule: FillRule::Inclusive,
            i_max: 10.0,
            lambda: 0.01,
            record_trace: true,
        }
    }
}

/// Limit prices wanted on each side; `None` means no quote.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuoteAction {
    pub bid: Option<f64>,
    pub ask: Option<f64>,
}

impl QuoteAction {
    pub fn get(&self, side: Side) -> Option<f64> {
        match side {
            Side::Bid => self.bid,
            Side::Ask => self.ask,
        }
    }
}

/// What a policy sees at a decision point.
pub struct DecisionView<'a> {
    pub tick_index: usize,
    pub tick: &'a Tick,
    /// Every tick up to and including the current one.
    pub history: &'a [Tick],
    pub portfolio: &'a Portfolio,
    pub status: [OrderStatus; 2],
    /// Limit price of the side's current order, if it has one.
    pub order_price: [Option<f64>; 2],
    /// Sides the policy is consulted for on this tick.
    pub consult: [bool; 2],
    /// The agent's own fills so far in the session.
    pub fills: &'a [Fill],
    pub episode: usize,
}

pub trait QuotingPolicy {
    fn quote(&mut self, view: &DecisionView<'_>) -> QuoteAction;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub index: usize,
    pub start_ms: i64,
    pub end_ms: i64,
    pub duration_ms: i64,
    pub reward: f64,
    pub max_abs_inventory: f64,
    pub fills: u64,
    pub round_trips: u64,
    /// Ended by the tick stream running out rather than by flattening.
    pub truncated: bool,
    pub start_tick: usize,
    pub end_tick: usize,
}

#[derive(Clone, Debug)]
pub struct SessionOutcome {
    /// Reward of every tick.
    pub rewards: Vec<f64>,
    pub episodes: Vec<EpisodeStats>,
    pub trace: Vec<TraceRecord>,
    pub fills: Vec<Fill>,
    /// Number of times each side (bid, ask) was offered to the policy.
    pub consultations: [u64; 2],
    pub final_portfolio: Portfolio,
}

impl SessionOutcome {
    pub fn cumulative_rewards(&self) -> Vec<f64> {
        self.rewards
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

pub struct Session {
    ticks: Arc<[Tick]>,
    config: SessionConfig,
    exchange: Exchange,
    portfolio: Portfolio,
    next_index: usize,
    /// Tick awaiting `act`, with the sides offered.
    decision: Option<(usize, [bool; 2])>,
    prev_mid: Option<f64>,
    rewards: Vec<f64>,
    pending_reward: f64,
    fills: Vec<Fill>,
    episodes: Vec<EpisodeStats>,
    current: Option<EpisodeStats>,
    touched: bool,
    consultations: [u64; 2],
}

impl Session {
    pub fn new(ticks: Arc<[Tick]>, config: SessionConfig) -> Self {
        let mut exchange = Exchange::new(config.latency, config.fill_rule);
        if !config.record_trace {
            exchange = exchange.without_trace();
        }
        Session {
            rewards: Vec::with_capacity(ticks.len()),
            ticks,
            config,
            exchange,
            portfolio: Portfolio::new(config.i_max),
            next_index: 0,
            decision: None,
            prev_mid: None,
            pending_reward: 0.0,
            fills: Vec::new(),
            episodes: Vec::new(),
            current: None,
            touched: false,
            consultations: [0, 0],
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.portfolio
    }

    pub fn exchange(&self) -> &Exchange {
        &self.exchange
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }

    pub fn episodes(&self) -> &[EpisodeStats] {
        &self.episodes
    }

    /// Episodes finished so far (by flattening).
    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    /// Ticks processed in the running episode.
    pub fn episode_ticks(&self) -> usize {
        self.current
            .as_ref()
            .map_or(0, |e| self.next_index - e.start_tick)
    }

    /// Reward accumulated since the previous call.
    pub fn take_reward(&mut self) -> f64 {
        std::mem::take(&mut self.pending_reward)
    }

    pub fn is_exhausted(&self) -> bool {
        self.next_index >= self.ticks.len()
    }

    /// Processes ticks until one needs a decision and returns its index, or
    /// `None` once the stream is exhausted.
    pub fn advance(&mut self) -> Option<usize> {
        assert!(self.decision.is_none(), "advance called before act");
        while self.next_index < self.ticks.len() {
            let i = self.next_index;
            self.next_index += 1;
            if let Some(consult) = self.process_tick(i) {
                self.decision = Some((i, consult));
                return Some(i);
            }
        }
        if let Some(mut ep) = self.current.take() {
            ep.truncated = true;
            self.episodes.push(ep);
        }
        None
    }

    fn process_tick(&mut self, i: usize) -> Option<[bool; 2]> {
        let tick = self.ticks[i];
        let prev = self.portfolio;
        let fills = self.exchange.on_tick(&tick);
        let ep = self.current.get_or_insert_with(|| EpisodeStats {
            index: self.episodes.len(),
            start_ms: tick.timestamp_ms,
            start_tick: i,
            ..Default::default()
        });
        for f in fills {
            let before = self.portfolio.inventory.abs();
            self.portfolio
                .apply_fill(f.side, f.price, f.qty)
                .expect("quote suppression keeps fills within the inventory cap");
            ep.fills += 1;
            if self.portfolio.inventory.abs() < before {
                ep.round_trips += 1;
            }
            self.fills.push(f);
        }
        let mid = tick.mid();
        let r = step_reward(&prev, &self.portfolio, self.prev_mid.unwrap_or(mid), mid, self.config.lambda).total();
        self.prev_mid = Some(mid);
        self.rewards.push(r);
        self.pending_reward += r;
        ep.reward += r;
        ep.end_ms = tick.timestamp_ms;
        ep.end_tick = i;
        ep.duration_ms = ep.end_ms - ep.start_ms;
        ep.max_abs_inventory = ep.max_abs_inventory.max(self.portfolio.inventory.abs());
        if !self.portfolio.is_flat() {
            self.touched = true;
        } else if self.touched {
            self.touched = false;
            self.exchange.force_cancel_all(tick.timestamp_ms);
            let done = self.current.take().expect("episode running");
            self.episodes.push(done);
            return None;
        }
        let consult = Side::BOTH.map(|s| matches!(self.exchange.status(s), OrderStatus::Open | OrderStatus::Closed));
        (consult[0] || consult[1]).then_some(consult)
    }

    pub fn view(&self) -> DecisionView<'_> {
        let (i, consult) = self.decision.expect("view needs a pending decision");
        DecisionView {
            tick_index: i,
            tick: &self.ticks[i],
            history: &self.ticks[..=i],
            portfolio: &self.portfolio,
            status: Side::BOTH.map(|s| self.exchange.status(s)),
            order_price: Side::BOTH.map(|s| self.exchange.order(s).map(|o| o.price)),
            consult,
            fills: &self.fills,
            episode: self.episodes.len(),
        }
    }

    /// Applies the policy's quotes for the sides offered at the pending
    /// decision. A new price on an OPEN order becomes a cancellation; the
    /// replacement can be sent once the order is CLOSED.
    pub fn act(&mut self, action: QuoteAction) {
        let (i, consult) = self.decision.take().expect("act needs a pending decision");
        let now = self.ticks[i].timestamp_ms;
        for side in Side::BOTH {
            if !consult[side.index()] {
                continue;
            }
            self.consultations[side.index()] += 1;
            let wanted = action.get(side).filter(|_| self.portfolio.can_fill(side, 1.0));
            match self.exchange.status(side) {
                OrderStatus::Closed => {
                    if let Some(price) = wanted {
                        self.exchange.submit(side, price, now).expect("side is free");
                    }
                }
                OrderStatus::Open => {
                    let current = self.exchange.order(side).map(|o| o.price);
                    if wanted != current {
                        self.exchange.request_cancel(side, now).expect("order is open");
                    }
                }
                _ => unreachable!("only OPEN and CLOSED sides are offered"),
            }
        }
        self.exchange.process_due(now);
    }

    pub fn finish(mut self) -> SessionOutcome {
        if self.decision.is_some() {
            self.act(QuoteAction::default());
        }
        while self.advance().is_some() {
            self.act(QuoteAction::default());
        }
        SessionOutcome {
            rewards: self.rewards,
            episodes: self.episodes,
            trace: self.exchange.take_trace(),
            fills: self.fills,
            consultations: self.consultations,
            final_portfolio: self.portfolio,
        }
    }
}

/// Drives `policy` over the whole tick stream.
pub fn run_event_loop(ticks: Arc<[Tick]>, config: SessionConfig, policy: &mut dyn QuotingPolicy) -> SessionOutcome {
    let mut session = Session::new(ticks, config);
    while session.advance().is_some() {
        let action = policy.quote(&session.view());
        session.act(action);
    }
    session.finish()
}
