//! Order lifecycle fuzzing: a random quoting policy over simulated ticks, with
//! every trace record replayed through an explicit state machine.

use hftmm_core::env::{
    run_event_loop, CloseReason, DecisionView, LatencyConfig, OrderStatus, QuoteAction, QuotingPolicy,
    SessionConfig, TraceKind, TraceRecord,
};
use hftmm_core::sim::{lognormal_from_moments, MarketSim, SimParams};
use hftmm_core::Tick;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::sync::Arc;

/// Quotes a random offset from the same-side best price, sometimes
/// marketable, sometimes nothing.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl QuotingPolicy for RandomPolicy {
    fn quote(&mut self, view: &DecisionView<'_>) -> QuoteAction {
        let mut pick = |k: usize, best: f64, sign: f64| {
            // Keep a resting order half the time so orders get to rest.
            if view.status[k] == OrderStatus::Open && self.rng.gen_bool(0.5) {
                return view.order_price[k];
            }
            if self.rng.gen_bool(0.2) {
                return None;
            }
            let bps = self.rng.gen_range(-3..6) as f64;
            Some(best * (1.0 - sign * bps * 1e-4))
        };
        QuoteAction {
            bid: pick(0, view.tick.best_bid, 1.0),
            ask: pick(1, view.tick.best_ask, -1.0),
        }
    }
}

/// The four lifecycle paths an order can take.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScenarioCounts {
    /// PENDING -> OPEN -> filled.
    pub filled: u64,
    /// PENDING -> rejected at arrival.
    pub rejected: u64,
    /// OPEN -> CANCELLING -> canceled.
    pub canceled: u64,
    /// OPEN -> CANCELLING -> filled before the cancel took effect.
    pub cancel_race: u64,
}

#[derive(Clone, Debug, Default)]
pub struct LifecycleReport {
    pub events: u64,
    pub records: u64,
    pub illegal_transitions: Vec<String>,
    pub fills_outside_live: u64,
    pub scenarios: ScenarioCounts,
}

impl LifecycleReport {
    pub fn passes(&self) -> bool {
        let s = self.scenarios;
        self.illegal_transitions.is_empty()
            && self.fills_outside_live == 0
            && s.filled > 0
            && s.rejected > 0
            && s.canceled > 0
            && s.cancel_race > 0
    }
}

fn edge_ok(from: OrderStatus, to: OrderStatus, reason: Option<CloseReason>) -> bool {
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

/// Replays a trace through the lifecycle graph.
pub fn audit(trace: &[TraceRecord], report: &mut LifecycleReport) {
    let mut state: HashMap<u64, OrderStatus> = HashMap::new();
    for r in trace {
        report.records += 1;
        let tracked = state.get(&r.order_id).copied();
        if r.status_before != tracked {
            report
                .illegal_transitions
                .push(format!("order {}: record says {:?}, replay has {:?}", r.order_id, r.status_before, tracked));
        }
        if r.fill && !matches!(r.status_before, Some(OrderStatus::Open | OrderStatus::Cancelling)) {
            report.fills_outside_live += 1;
        }
        match (r.kind, r.status_before) {
            (TraceKind::Submit, None) if r.status_after == OrderStatus::Pending => {}
            (TraceKind::CancelFailed, Some(OrderStatus::Closed)) if r.status_after == OrderStatus::Closed => {}
            (_, Some(from)) if edge_ok(from, r.status_after, r.reason.filter(|_| r.status_after == OrderStatus::Closed)) => {}
            _ => report.illegal_transitions.push(format!(
                "order {}: {:?} {:?} -> {:?} ({:?})",
                r.order_id, r.kind, r.status_before, r.status_after, r.reason
            )),
        }
        state.insert(r.order_id, r.status_after);
        let s = &mut report.scenarios;
        match (r.kind, r.status_before) {
            (TraceKind::Fill, Some(OrderStatus::Open)) => s.filled += 1,
            (TraceKind::Fill, Some(OrderStatus::Cancelling)) => s.cancel_race += 1,
            (TraceKind::Reject, _) => s.rejected += 1,
            (TraceKind::Cancel, Some(OrderStatus::Cancelling)) => s.canceled += 1,
            _ => {}
        }
    }
}

pub fn volatile_ticks(seed: u64, n: usize) -> Arc<[Tick]> {
    let (dt_mu, dt_sigma) = lognormal_from_moments(15.0, 15.0);
    let params = SimParams {
        dt_mu,
        dt_sigma,
        dp_sigma: 5e-6,
        seed,
        ..SimParams::test_stream()
    };
    let mut sim = MarketSim::new(params).expect("valid params");
    (0..n).map(|_| sim.next_tick().tick()).collect()
}

/// Runs the random policy over `events` ticks split across latency settings.
pub fn fuzz(seed: u64, events: usize) -> LifecycleReport {
    let latencies = [(0, 0), (10, 30), (30, 10), (5, 80)];
    let per = events / latencies.len();
    let mut report = LifecycleReport::default();
    for (k, (submit, cancel)) in latencies.into_iter().enumerate() {
        let ticks = volatile_ticks(seed * 10 + k as u64, per);
        let config = SessionConfig {
            latency: LatencyConfig::new(submit, cancel),
            i_max: 3.0,
            ..Default::default()
        };
        let out = run_event_loop(ticks, config, &mut RandomPolicy::new(seed * 10 + k as u64));
        report.events += per as u64;
        let fill_records = out.trace.iter().filter(|r| r.kind == TraceKind::Fill).count();
        if fill_records != out.fills.len() {
            report
                .illegal_transitions
                .push(format!("{} fills but {fill_records} fill records", out.fills.len()));
        }
        audit(&out.trace, &mut report);
    }
    report
}
