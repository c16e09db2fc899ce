//! Inputs shared by the benchmarks.

use hftmm_core::feed::{BookSnapshot, DoneReason, Level3Message, MsgType};
use hftmm_core::sim::{MarketSim, SimParams};
use hftmm_core::{Side, Tick};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn sim_ticks(seed: u64, n: usize) -> Arc<[Tick]> {
    let mut sim = MarketSim::new(SimParams {
        seed,
        ..SimParams::test_stream()
    })
    .expect("default parameters are valid");
    (0..n).map(|_| sim.next_tick().tick()).collect()
}

/// A consistent level-3 stream: opens around 100.00, then cancels and
/// partial matches against live orders.
pub fn book_stream(seed: u64, n: usize) -> (BookSnapshot, Vec<Level3Message>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live: Vec<(String, Side, f64, f64)> = Vec::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let roll = rng.gen_range(0..10);
        let (msg_type, id, side, price, size, reason) = if live.len() < 50 || roll < 5 {
            let side = if rng.gen_bool(0.5) { Side::Bid } else { Side::Ask };
            let cents = match side {
                Side::Bid => rng.gen_range(9_950..10_000),
                Side::Ask => rng.gen_range(10_001..10_051),
            };
            let id = format!("o{i}");
            let size = rng.gen_range(1..100) as f64 / 10.0;
            live.push((id.clone(), side, cents as f64 / 100.0, size));
            (MsgType::Open, id, side, cents as f64 / 100.0, size, None)
        } else if roll < 8 {
            let (id, side, price, size) = live.swap_remove(rng.gen_range(0..live.len()));
            (MsgType::Done, id, side, price, size, Some(DoneReason::Canceled))
        } else {
            let k = rng.gen_range(0..live.len());
            let o = &mut live[k];
            let take = (o.3 / 2.0 * 10.0).floor() / 10.0;
            if take <= 0.0 {
                let (id, side, price, _) = live.swap_remove(k);
                (MsgType::Done, id, side, price, 0.0, Some(DoneReason::Filled))
            } else {
                o.3 = ((o.3 - take) * 10.0).round() / 10.0;
                (MsgType::Match, o.0.clone(), o.1, o.2, take, None)
            }
        };
        out.push(Level3Message {
            sequence: i + 1,
            timestamp_ms: i as i64,
            msg_type,
            order_id: id,
            side,
            price,
            size,
            reason,
            exchange_ts_ms: None,
        });
    }
    (BookSnapshot::default(), out)
}
