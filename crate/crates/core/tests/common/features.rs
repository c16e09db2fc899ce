//! Brute-force feature values from integer replays of the fixture streams,
//! and the least-squares oracles.

use super::book::{random_stream, NaiveBook};
use hftmm_core::book::BookConfig;
use hftmm_core::feed::{BookSnapshot, DoneReason, Level3Message, MsgType};
use hftmm_core::features::{compute_features, evaluate_predictor, FeatureConfig};
use hftmm_core::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Grid sized for the cent-scale fixture streams (1 bp is about one cent).
pub fn fixture_config() -> FeatureConfig {
    FeatureConfig {
        q_grid: vec![0.5, 1.0, 2.5, 6.0],
        d_grid_bps: vec![1.0, 3.0, 8.0],
        deltas_flow_ms: vec![5, 20, 60],
        deltas_pret_ms: vec![5, 20, 60],
        horizons_ms: vec![10],
        sample_ms: 7,
    }
}

fn price(cents: i64) -> f64 {
    cents as f64 / 100.0
}

fn qty(hundredths: i64) -> f64 {
    hundredths as f64 / 100.0
}

fn mean(terms: &[Option<f64>]) -> Option<f64> {
    let kept: Vec<f64> = terms.iter().flatten().copied().collect();
    (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
}

fn depth_cents(levels: &[(i64, i64)], want: i64) -> Option<i64> {
    let mut cum = 0;
    for &(c, h) in levels {
        cum += h;
        if cum >= want {
            return Some(c);
        }
    }
    None
}

fn oid(bids: &[(i64, i64)], asks: &[(i64, i64)], q_grid: &[f64]) -> Option<f64> {
    let (best_b, best_a) = (bids.first()?.0, asks.first()?.0);
    let terms: Vec<Option<f64>> = q_grid
        .iter()
        .map(|q| {
            let want = (q * 100.0).round() as i64;
            let a = price(depth_cents(asks, want)?) - price(best_a);
            let b = price(best_b) - price(depth_cents(bids, want)?);
            (b != 0.0).then(|| a / b - 1.0)
        })
        .collect();
    mean(&terms)
}

fn oiq(bids: &[(i64, i64)], asks: &[(i64, i64)], d_grid_bps: &[f64]) -> Option<f64> {
    let (best_b, best_a) = (bids.first()?.0, asks.first()?.0);
    let within = |levels: &[(i64, i64)], best: i64, d: i64| -> i64 {
        levels.iter().filter(|(c, _)| (c - best).abs() * 10_000 <= d * best).map(|l| l.1).sum()
    };
    let terms: Vec<Option<f64>> = d_grid_bps
        .iter()
        .map(|&d| {
            let d = d as i64;
            let a = qty(within(asks, best_a, d));
            let b = qty(within(bids, best_b, d));
            (b != 0.0).then(|| a / b - 1.0)
        })
        .collect();
    mean(&terms)
}

fn imbalance(a: f64, b: f64) -> Option<f64> {
    (a + b > 0.0).then(|| (a - b) / (a + b))
}

/// (tiq, tic, tio) over `[t - delta, t]` by direct scan.
fn flow(messages: &[Level3Message], t: i64, delta: i64) -> Option<(Option<f64>, Option<f64>, Option<f64>)> {
    if t - delta < messages.first()?.timestamp_ms {
        return None;
    }
    let (mut sub, mut cxl, mut traded, mut count) = ([0i64; 2], [0i64; 2], [0i64; 2], [0i64; 2]);
    for m in messages.iter().filter(|m| m.timestamp_ms >= t - delta && m.timestamp_ms <= t) {
        let h = (m.size * 100.0).round() as i64;
        let s = m.side.index();
        match m.msg_type {
            MsgType::Open => sub[s] += h,
            MsgType::Done if m.reason == Some(DoneReason::Canceled) => cxl[s] += h,
            // Index 0 collects sells (resting bid hit), 1 buys.
            MsgType::Match => {
                traded[s] += h;
                count[s] += 1;
            }
            _ => {}
        }
    }
    let (bid, ask) = (Side::Bid.index(), Side::Ask.index());
    Some((
        imbalance(qty(traded[bid]), qty(traded[ask])),
        imbalance(count[bid] as f64, count[ask] as f64),
        imbalance(qty(sub[ask]) - qty(cxl[ask]), qty(sub[bid]) - qty(cxl[bid])),
    ))
}

/// Expected feature row at `t` for a time-ordered stream.
pub fn brute_row(snap: &BookSnapshot, messages: &[Level3Message], t: i64, config: &FeatureConfig) -> Vec<Option<f64>> {
    let upto = messages.iter().take_while(|m| m.timestamp_ms <= t).count();
    let book = NaiveBook::replay(snap, &messages[..upto], false);
    let (bids, asks) = (book.levels(Side::Bid), book.levels(Side::Ask));
    let mut row = vec![oid(&bids, &asks, &config.q_grid), oiq(&bids, &asks, &config.d_grid_bps)];
    let flows: Vec<_> = config.deltas_flow_ms.iter().map(|&d| flow(messages, t, d)).collect();
    row.extend(flows.iter().map(|f| f.and_then(|x| x.0)));
    row.extend(flows.iter().map(|f| f.and_then(|x| x.1)));
    row.extend(flows.iter().map(|f| f.and_then(|x| x.2)));
    // Mid after the latest message at or before `x` that left both sides quoted.
    let mid_at = |x: i64| -> Option<f64> {
        let n = messages.iter().take_while(|m| m.timestamp_ms <= x).count();
        (1..=n).rev().find_map(|k| {
            let b = NaiveBook::replay(snap, &messages[..k], false);
            let (bb, ba) = (b.levels(Side::Bid).first()?.0, b.levels(Side::Ask).first()?.0);
            Some((price(bb) + price(ba)) / 2.0)
        })
    };
    row.extend(config.deltas_pret_ms.iter().map(|&d| Some(mid_at(t)? / mid_at(t - d)? - 1.0)));
    row
}

/// Compares every row of the feature table with the brute-force values.
/// Returns the number of defined values checked.
pub fn check_stream(seed: u64, max_len: usize) -> Result<usize, String> {
    let (snap, msgs) = random_stream(seed, max_len);
    let config = fixture_config();
    let table = compute_features(&snap, &msgs, &config, BookConfig::default()).map_err(|e| e.to_string())?;
    let mut defined = 0;
    for (t, row) in table.timestamps.iter().zip(&table.rows) {
        let want = brute_row(&snap, &msgs, *t, &config);
        for ((name, got), want) in table.columns.iter().zip(row).zip(&want) {
            if got != want {
                return Err(format!("seed {seed} t {t} {name}: {got:?} vs {want:?}"));
            }
            defined += usize::from(got.is_some());
        }
    }
    Ok(defined)
}

/// Two-pass estimates `(alpha, beta, r2, se_beta)`.
pub fn two_pass(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - alpha - beta * x).powi(2)).sum();
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (alpha, beta, 1.0 - ssr / sst, (ssr / (n - 2.0) / sxx).sqrt())
}

/// Worst relative gap between the streaming fit and the two-pass formulas.
pub fn ols_vs_two_pass(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(10..5_000);
    let beta = rng.gen_range(-3.0..3.0);
    let shift = rng.gen_range(-100.0..100.0);
    let xs: Vec<f64> = (0..n).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.3 + beta * x + rng.sample::<f64, _>(StandardNormal)).collect();
    let r = evaluate_predictor("x", 1, xs.iter().zip(&ys).map(|(x, y)| (Some(*x), Some(*y))));
    let (a, b, r2, se) = two_pass(&xs, &ys);
    let rel = |u: Option<f64>, v: f64| (u.unwrap_or(f64::NAN) - v).abs() / v.abs().max(1e-300);
    [rel(r.alpha, a), rel(r.beta, b), rel(r.r_squared, r2), rel(r.beta_se, se)]
        .into_iter()
        .fold(0.0, f64::max)
}

/// Trials in which the fitted slope lies within three standard errors of
/// the planted one.
pub fn planted_beta_hits(trials: u64) -> u64 {
    (0..trials)
        .filter(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + k);
            let beta = rng.gen_range(-2.0..2.0);
            let samples: Vec<(Option<f64>, Option<f64>)> = (0..2_000)
                .map(|_| {
                    let x: f64 = rng.sample(StandardNormal);
                    let e: f64 = rng.sample(StandardNormal);
                    (Some(x), Some(0.1 + beta * x + 0.5 * e))
                })
                .collect();
            let r = evaluate_predictor("x", 1, samples);
            (r.beta.unwrap() - beta).abs() <= 3.0 * r.beta_se.unwrap()
        })
        .count() as u64
}
