//! Action grid, observation encoding and the baseline quoting policies.
//!
//! Quotes sit 1 to 10 basis points behind the best price on each side, which
//! gives 100 joint actions indexed `(a_bid - 1) * 10 + (a_ask - 1)`.

use crate::env::{DecisionView, OrderStatus, QuoteAction, QuotingPolicy, Session, SessionConfig};
use crate::env::run_event_loop;
use crate::ticks::last_at_or_before;
use crate::types::{Side, Tick};
use serde::Serialize;
use std::sync::Arc;

pub const LEVELS: u8 = 10;
pub const ACTION_COUNT: usize = (LEVELS as usize) * (LEVELS as usize);
/// Level used by the fixed baseline and as the adaptive policy's centre.
pub const MEDIAN_LEVEL: u8 = 5;
/// rdr (2) + status one-hots (8) + inventory ratio + entry-price distance.
pub const BASE_DIM: usize = 12;
const BPS: f64 = 1e4;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ActionError {
    #[error("action levels must be in 1..=10, got ({0}, {1})")]
    OutOfRange(u8, u8),
    #[error("action index must be < 100, got {0}")]
    BadIndex(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ActionPair {
    pub a_bid: u8,
    pub a_ask: u8,
}

impl ActionPair {
    pub fn new(a_bid: u8, a_ask: u8) -> Result<Self, ActionError> {
        if (1..=LEVELS).contains(&a_bid) && (1..=LEVELS).contains(&a_ask) {
            Ok(ActionPair { a_bid, a_ask })
        } else {
            Err(ActionError::OutOfRange(a_bid, a_ask))
        }
    }

    pub fn index(self) -> usize {
        (self.a_bid as usize - 1) * LEVELS as usize + (self.a_ask as usize - 1)
    }

    pub fn from_index(i: usize) -> Result<Self, ActionError> {
        if i >= ACTION_COUNT {
            return Err(ActionError::BadIndex(i));
        }
        Ok(ActionPair {
            a_bid: (i / LEVELS as usize) as u8 + 1,
            a_ask: (i % LEVELS as usize) as u8 + 1,
        })
    }

    pub fn all() -> impl Iterator<Item = ActionPair> {
        (0..ACTION_COUNT).map(|i| ActionPair::from_index(i).expect("in range"))
    }
}

/// Limit prices for an action against the current best quotes.
pub fn decode_action(a: ActionPair, best_bid: f64, best_ask: f64) -> (f64, f64) {
    (
        best_bid * (1.0 - a.a_bid as f64 / BPS),
        best_ask * (1.0 + a.a_ask as f64 / BPS),
    )
}

pub fn quote_for(a: ActionPair, tick: &Tick) -> QuoteAction {
    let (bid, ask) = decode_action(a, tick.best_bid, tick.best_ask);
    QuoteAction {
        bid: Some(bid),
        ask: Some(ask),
    }
}

/// Agent state at a decision point. Alpha values are `None` when undefined.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub rdr_bid: f64,
    pub rdr_ask: f64,
    pub status_bid: OrderStatus,
    pub status_ask: OrderStatus,
    pub ir: f64,
    /// `(EP - mid) / mid` while holding inventory, else 0.
    pub ep_rel: f64,
    pub alpha: Vec<Option<f64>>,
}

pub fn one_hot(status: OrderStatus) -> [f64; 4] {
    let mut v = [0.0; 4];
    v[status.index()] = 1.0;
    v
}

impl Observation {
    pub fn dim(&self) -> usize {
        BASE_DIM + 2 * self.alpha.len()
    }

    /// Network input. Price distances are expressed in basis points; each
    /// alpha value is followed by a validity bit and imputed as 0 when
    /// undefined.
    pub fn write_vector(&self, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.rdr_bid * BPS);
        out.push(self.rdr_ask * BPS);
        out.extend(one_hot(self.status_bid));
        out.extend(one_hot(self.status_ask));
        out.push(self.ir);
        out.push(self.ep_rel * BPS);
        for a in &self.alpha {
            out.push(a.unwrap_or(0.0));
            out.push(if a.is_some() { 1.0 } else { 0.0 });
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        self.write_vector(&mut v);
        v
    }
}

/// Extra observation features. Implementations must only read data stamped
/// at or before the decision tick.
pub trait AlphaSource: Send {
    fn names(&self) -> Vec<String>;
    fn values(&mut self, view: &DecisionView<'_>) -> Vec<Option<f64>>;
}

/// Alpha block available on simulated data: past mid returns (bps) and
/// trade imbalances computed from the agent's own fills.
#[derive(Clone, Debug)]
pub struct SimAlpha {
    pub pret_ms: Vec<i64>,
    pub flow_ms: i64,
}

impl Default for SimAlpha {
    fn default() -> Self {
        SimAlpha {
            pret_ms: vec![200, 1000],
            flow_ms: 200,
        }
    }
}

/// Mid return over the trailing `delta_ms`, using the last tick at or before
/// `t - delta`.
pub fn pret_from_ticks(history: &[Tick], delta_ms: i64) -> Option<f64> {
    let now = history.last()?;
    let then = last_at_or_before(history, now.timestamp_ms - delta_ms)?;
    Some(now.mid() / history[then].mid() - 1.0)
}

impl AlphaSource for SimAlpha {
    fn names(&self) -> Vec<String> {
        let mut n: Vec<String> = self.pret_ms.iter().map(|d| format!("pret_{d}")).collect();
        n.push(format!("tiq_{}", self.flow_ms));
        n.push(format!("tic_{}", self.flow_ms));
        n
    }

    fn values(&mut self, view: &DecisionView<'_>) -> Vec<Option<f64>> {
        let mut out: Vec<Option<f64>> = self
            .pret_ms
            .iter()
            .map(|&d| pret_from_ticks(view.history, d).map(|r| r * BPS))
            .collect();
        let since = view.tick.timestamp_ms - self.flow_ms;
        // A fill of the agent's bid is a seller-initiated trade and vice versa.
        let (mut sell_q, mut buy_q, mut sell_n, mut buy_n) = (0.0, 0.0, 0.0, 0.0);
        for f in view.fills.iter().rev().take_while(|f| f.at_ms >= since) {
            match f.side {
                Side::Bid => {
                    sell_q += f.qty;
                    sell_n += 1.0;
                }
                Side::Ask => {
                    buy_q += f.qty;
                    buy_n += 1.0;
                }
            }
        }
        let imbalance = |s: f64, b: f64| (s + b > 0.0).then(|| (s - b) / (s + b));
        out.push(imbalance(sell_q, buy_q));
        out.push(imbalance(sell_n, buy_n));
        out
    }
}

/// Builds observations, optionally with an alpha block.
#[derive(Default)]
pub struct ObservationEncoder {
    alpha: Option<Box<dyn AlphaSource>>,
}

impl ObservationEncoder {
    pub fn new(alpha: Option<Box<dyn AlphaSource>>) -> Self {
        ObservationEncoder { alpha }
    }

    pub fn with_sim_alpha() -> Self {
        ObservationEncoder::new(Some(Box::new(SimAlpha::default())))
    }

    pub fn alpha_names(&self) -> Vec<String> {
        self.alpha.as_ref().map_or_else(Vec::new, |a| a.names())
    }

    pub fn dim(&self) -> usize {
        BASE_DIM + 2 * self.alpha_names().len()
    }

    /// Names of the network input components in order.
    pub fn schema(&self) -> Vec<String> {
        let mut s: Vec<String> = ["rdr_bid_bps", "rdr_ask_bps"].map(String::from).to_vec();
        for side in Side::BOTH {
            for st in OrderStatus::ALL {
                s.push(format!("os_{side}_{}", st.to_string().to_lowercase()));
            }
        }
        s.push("ir".into());
        s.push("ep_rel_bps".into());
        for n in self.alpha_names() {
            s.push(n.clone());
            s.push(format!("{n}_valid"));
        }
        s
    }

    pub fn encode(&mut self, view: &DecisionView<'_>) -> Observation {
        let t = view.tick;
        let live = |side: Side| -> Option<f64> {
            match view.status[side.index()] {
                OrderStatus::Closed => None,
                _ => view.order_price[side.index()],
            }
        };
        let rdr_bid = live(Side::Bid).map_or(0.0, |p| (t.best_bid - p) / t.best_bid);
        let rdr_ask = live(Side::Ask).map_or(0.0, |p| (p - t.best_ask) / t.best_ask);
        let pf = view.portfolio;
        let mid = t.mid();
        let ep_rel = if pf.is_flat() { 0.0 } else { (pf.entry_price - mid) / mid };
        Observation {
            rdr_bid,
            rdr_ask,
            status_bid: view.status[0],
            status_ask: view.status[1],
            ir: pf.inventory_ratio(),
            ep_rel,
            alpha: self.alpha.as_mut().map_or_else(Vec::new, |a| a.values(view)),
        }
    }
}

pub fn fixed_spread_policy(_obs: &Observation) -> ActionPair {
    ActionPair {
        a_bid: MEDIAN_LEVEL,
        a_ask: MEDIAN_LEVEL,
    }
}

/// Skews quotes linearly with the inventory ratio: a long book moves the bid
/// away and the ask closer.
pub fn adaptive_spread_policy(obs: &Observation, k: f64) -> ActionPair {
    adaptive_levels(obs.ir, k)
}

fn adaptive_levels(ir: f64, k: f64) -> ActionPair {
    let m = MEDIAN_LEVEL as f64;
    let level = |x: f64| x.round().clamp(1.0, LEVELS as f64) as u8;
    ActionPair {
        a_bid: level(m + k * ir * m),
        a_ask: level(m - k * ir * m),
    }
}

pub struct NullPolicy;

impl QuotingPolicy for NullPolicy {
    fn quote(&mut self, _: &DecisionView<'_>) -> QuoteAction {
        QuoteAction::default()
    }
}

pub struct FixedSpread;

impl QuotingPolicy for FixedSpread {
    fn quote(&mut self, view: &DecisionView<'_>) -> QuoteAction {
        quote_for(
            ActionPair {
                a_bid: MEDIAN_LEVEL,
                a_ask: MEDIAN_LEVEL,
            },
            view.tick,
        )
    }
}

pub struct AdaptiveSpread {
    pub k: f64,
}

impl QuotingPolicy for AdaptiveSpread {
    fn quote(&mut self, view: &DecisionView<'_>) -> QuoteAction {
        quote_for(adaptive_levels(view.portfolio.inventory_ratio(), self.k), view.tick)
    }
}

/// Picks the grid value with the highest total reward on `ticks`; ties go to
/// the smallest k. Returns the winner and every `(k, reward)` evaluated.
pub fn tune_adaptive_k(ticks: Arc<[Tick]>, grid: &[f64], config: SessionConfig) -> Option<(f64, Vec<(f64, f64)>)> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let config = SessionConfig {
        record_trace: false,
        ..config
    };
    let scores: Vec<(f64, f64)> = sorted
        .iter()
        .map(|&k| (k, run_event_loop(ticks.clone(), config, &mut AdaptiveSpread { k }).total_reward()))
        .collect();
    let mut best = *scores.first()?;
    for &(k, r) in &scores[1..] {
        if r > best.1 {
            best = (k, r);
        }
    }
    Some((best.0, scores))
}

/// Builds the observation a policy would see at the session's pending decision.
pub fn observe(session: &Session, encoder: &mut ObservationEncoder) -> Observation {
    encoder.encode(&session.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::Portfolio;
    use proptest::prelude::*;

    #[test]
    fn decode_examples() {
        let a = ActionPair::new(1, 5).unwrap();
        let (bid, ask) = decode_action(a, 20_000.0, 100.0);
        assert!((bid - 19_998.0).abs() < 1e-9);
        assert!((ask - 100.05).abs() < 1e-12);
        let (bid, _) = decode_action(ActionPair::new(10, 1).unwrap(), 20_000.0, 20_001.0);
        assert!((bid - 19_980.0).abs() < 1e-9);
    }

    #[test]
    fn index_round_trip() {
        for i in 0..ACTION_COUNT {
            assert_eq!(ActionPair::from_index(i).unwrap().index(), i);
        }
        assert_eq!(ActionPair::new(1, 1).unwrap().index(), 0);
        assert_eq!(ActionPair::new(10, 10).unwrap().index(), 99);
        assert!(ActionPair::new(0, 3).is_err());
        assert!(ActionPair::from_index(100).is_err());
        assert_eq!(ActionPair::all().count(), 100);
    }

    fn obs(ir: f64) -> Observation {
        Observation {
            rdr_bid: 0.0,
            rdr_ask: 0.0,
            status_bid: OrderStatus::Closed,
            status_ask: OrderStatus::Closed,
            ir,
            ep_rel: 0.0,
            alpha: vec![],
        }
    }

    #[test]
    fn baselines() {
        assert_eq!(fixed_spread_policy(&obs(0.7)), ActionPair { a_bid: 5, a_ask: 5 });
        assert_eq!(adaptive_spread_policy(&obs(0.0), 3.0), ActionPair { a_bid: 5, a_ask: 5 });
        assert_eq!(adaptive_spread_policy(&obs(1.0), 1.0), ActionPair { a_bid: 10, a_ask: 1 });
        assert_eq!(adaptive_spread_policy(&obs(-1.0), 1.0), ActionPair { a_bid: 1, a_ask: 10 });
    }

    #[test]
    fn one_hot_layout() {
        assert_eq!(one_hot(OrderStatus::Open), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(one_hot(OrderStatus::Closed), [0.0, 0.0, 0.0, 1.0]);
    }

    fn view_with<'a>(tick: &'a Tick, pf: &'a Portfolio, status: [OrderStatus; 2], px: [Option<f64>; 2]) -> DecisionView<'a> {
        DecisionView {
            tick_index: 0,
            tick,
            history: std::slice::from_ref(tick),
            portfolio: pf,
            status,
            order_price: px,
            consult: [true, true],
            fills: &[],
            episode: 0,
        }
    }

    #[test]
    fn encode_examples() {
        let tick = Tick { timestamp_ms: 0, best_bid: 100.0, best_ask: 101.0 };
        let pf = Portfolio::new(10.0);
        let mut enc = ObservationEncoder::default();
        let o = enc.encode(&view_with(&tick, &pf, [OrderStatus::Closed; 2], [None, None]));
        assert_eq!((o.ir, o.ep_rel, o.rdr_bid, o.rdr_ask), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(o.status_bid, OrderStatus::Closed);
        assert_eq!(o.to_vector().len(), BASE_DIM);

        let o = enc.encode(&view_with(&tick, &pf, [OrderStatus::Open, OrderStatus::Open], [Some(100.0), Some(101.5)]));
        assert_eq!(o.rdr_bid, 0.0);
        assert!((o.rdr_ask - 0.5 / 101.0).abs() < 1e-15);
        assert_eq!(&o.to_vector()[2..6], &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn sim_alpha_dimensions_are_stable() {
        let mut enc = ObservationEncoder::with_sim_alpha();
        assert_eq!(enc.dim(), BASE_DIM + 8);
        assert_eq!(enc.schema().len(), enc.dim());
        let tick = Tick { timestamp_ms: 5, best_bid: 100.0, best_ask: 101.0 };
        let pf = Portfolio::new(10.0);
        let o = enc.encode(&view_with(&tick, &pf, [OrderStatus::Closed; 2], [None, None]));
        assert_eq!(o.to_vector().len(), enc.dim());
        assert!(o.alpha.iter().all(Option::is_none));
    }

    #[test]
    fn pret_lookup() {
        let t = |ts, m: f64| Tick { timestamp_ms: ts, best_bid: m - 0.5, best_ask: m + 0.5 };
        let h = [t(0, 100.0), t(150, 100.5), t(250, 101.0)];
        assert_eq!(pret_from_ticks(&h, 250), Some(101.0 / 100.0 - 1.0));
        assert_eq!(pret_from_ticks(&h, 100), Some(101.0 / 100.5 - 1.0));
        assert_eq!(pret_from_ticks(&h, 300), None);
    }

    #[test]
    fn tuning_single_grid_point() {
        let ticks: Arc<[Tick]> = (0..100).map(|i| Tick { timestamp_ms: i, best_bid: 99.0, best_ask: 101.0 }).collect();
        let (k, scores) = tune_adaptive_k(ticks.clone(), &[0.0], SessionConfig::default()).unwrap();
        assert_eq!(k, 0.0);
        assert_eq!(scores.len(), 1);
        // Flat, never-crossing market: every k scores 0 and the smallest wins.
        let (k, _) = tune_adaptive_k(ticks, &[2.0, 0.5, 1.0], SessionConfig::default()).unwrap();
        assert_eq!(k, 0.5);
    }

    proptest! {
        #[test]
        fn decode_is_monotone(a in 1u8..10, b in 1u8..10, bid in 1.0..1e5f64, spread in 1e-6..1e-2f64) {
            let ask = bid * (1.0 + spread);
            let lo = decode_action(ActionPair::new(a, b).unwrap(), bid, ask);
            let hi = decode_action(ActionPair::new(a + 1, b + 1).unwrap(), bid, ask);
            prop_assert!(hi.0 < lo.0);
            prop_assert!(hi.1 > lo.1);
        }

        #[test]
        fn adaptive_is_antisymmetric(ir in -1.0..1.0f64, k in 0.0..5.0f64) {
            let p = adaptive_spread_policy(&obs(ir), k);
            let m = adaptive_spread_policy(&obs(-ir), k);
            prop_assert_eq!((p.a_bid, p.a_ask), (m.a_ask, m.a_bid));
        }
    }
}
