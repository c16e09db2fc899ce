//! Backtest output replayed through the cash oracle.

mod common;

use common::accounting::{rel_err, CashBook};
use common::lifecycle::{volatile_ticks, RandomPolicy};
use hftmm_core::backtest::run_backtest;
use hftmm_core::env::{LatencyConfig, SessionConfig, TraceKind};

#[test]
fn cumulative_reward_matches_cash_replay() {
    let ticks = volatile_ticks(42, 60_000);
    let config = SessionConfig {
        latency: LatencyConfig::new(20, 30),
        i_max: 4.0,
        lambda: 0.01,
        record_trace: true,
        ..Default::default()
    };
    let res = run_backtest(&mut RandomPolicy::new(7), ticks.clone(), config);
    let out = &res.outcome;
    assert!(out.fills.len() > 500, "{} fills", out.fills.len());

    let mut cash = CashBook::default();
    let mut penalty = 0.0;
    let mut next_fill = 0;
    for (i, t) in ticks.iter().enumerate() {
        while next_fill < out.fills.len() && out.fills[next_fill].at_ms == t.timestamp_ms {
            let f = out.fills[next_fill];
            cash.fill(f.side, f.price, f.qty);
            next_fill += 1;
        }
        penalty += config.lambda * cash.inventory.abs();
        let want = cash.mtm(t.mid()) - penalty;
        assert!(rel_err(res.cumulative[i], want) <= 1e-9, "tick {i}: {} vs {want}", res.cumulative[i]);
    }
    assert_eq!(next_fill, out.fills.len());

    let fill_records: Vec<_> = out.trace.iter().filter(|r| r.kind == TraceKind::Fill).collect();
    assert_eq!(fill_records.len(), out.fills.len());
    for (r, f) in fill_records.iter().zip(&out.fills) {
        assert_eq!((r.side, r.price, r.at_ms), (f.side, f.price, f.at_ms));
    }

    let by_episode: f64 = res.episodes().iter().map(|e| e.reward).sum();
    assert!(rel_err(by_episode, res.total_reward()) <= 1e-9);
    for e in res.episodes().iter().filter(|e| !e.truncated) {
        assert!(e.max_abs_inventory > 0.0);
    }
}
