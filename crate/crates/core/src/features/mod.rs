//! Microstructure alpha signals and their predictive evaluation.
//!
//! Book-shape imbalances (OID, OIQ) read the reconstructed ladder, flow
//! imbalances (TIQ, TIC, TIO) read trailing [`FlowCounters`], and PRET reads
//! the mid history. Undefined values are `None`, never 0.

mod ols;
mod pipeline;

pub use ols::{evaluate_predictor, OlsAccumulator, RegressionReport};
pub use pipeline::{
    compute_features, forward_returns, predict_eval, reconstruct_ticks, FeatureTable, FeatureTableError,
    TableAlpha,
};

use crate::book::OrderBook;
use crate::flow::FlowCounters;
use crate::ticks::last_at_or_before;
use crate::types::{Side, Tick};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Cumulative base quantities for OID.
    pub q_grid: Vec<f64>,
    /// Relative distances from the best price for OIQ, in basis points.
    pub d_grid_bps: Vec<f64>,
    pub deltas_flow_ms: Vec<i64>,
    pub deltas_pret_ms: Vec<i64>,
    pub horizons_ms: Vec<i64>,
    /// Sampling period of the feature grid.
    pub sample_ms: i64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            q_grid: vec![10.0, 20.0, 40.0, 80.0],
            d_grid_bps: vec![5.0, 10.0, 20.0, 40.0],
            deltas_flow_ms: vec![100, 200, 500, 1000, 2000],
            deltas_pret_ms: vec![200, 400, 600, 800, 1000],
            horizons_ms: vec![100, 200, 500, 1000, 2000],
            sample_ms: 100,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("invalid feature config: {0}")]
pub struct FeatureConfigError(String);

fn check_grid<T: PartialOrd + Default + Copy>(name: &str, g: &[T]) -> Result<(), FeatureConfigError> {
    if g.is_empty() {
        return Err(FeatureConfigError(format!("{name} is empty")));
    }
    if g[0] <= T::default() || g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FeatureConfigError(format!("{name} must be positive and strictly increasing")));
    }
    Ok(())
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureConfigError> {
        check_grid("q_grid", &self.q_grid)?;
        check_grid("d_grid_bps", &self.d_grid_bps)?;
        check_grid("deltas_flow_ms", &self.deltas_flow_ms)?;
        check_grid("deltas_pret_ms", &self.deltas_pret_ms)?;
        check_grid("horizons_ms", &self.horizons_ms)?;
        if self.sample_ms <= 0 {
            return Err(FeatureConfigError("sample_ms must be positive".into()));
        }
        Ok(())
    }

    /// Column names of the wide feature table, in order.
    pub fn columns(&self) -> Vec<String> {
        let mut c = vec!["oid".to_string(), "oiq".to_string()];
        for kind in ["tiq", "tic", "tio"] {
            c.extend(self.deltas_flow_ms.iter().map(|d| format!("{kind}_{d}")));
        }
        c.extend(self.deltas_pret_ms.iter().map(|d| format!("pret_{d}")));
        c
    }
}

/// Mean of per-level ratio terms with the number of terms left out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImbalanceValue {
    pub value: Option<f64>,
    pub skipped: usize,
}

fn mean_of_terms(terms: impl Iterator<Item = Option<f64>>) -> ImbalanceValue {
    let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for t in terms {
        match t {
            Some(x) => {
                sum += x;
                n += 1;
            }
            None => skipped += 1,
        }
    }
    ImbalanceValue {
        value: (n > 0).then(|| sum / n as f64),
        skipped,
    }
}

/// Order price-distance imbalance: per grid quantity, the ask-side distance
/// from the best ask to the level reaching that depth over the bid-side one,
/// minus one. Terms lacking depth or with a zero bid distance are skipped.
pub fn oid(book: &OrderBook, q_grid: &[f64]) -> ImbalanceValue {
    let (Some(best_ask), Some(best_bid)) = (book.best_ask(), book.best_bid()) else {
        return ImbalanceValue {
            value: None,
            skipped: q_grid.len(),
        };
    };
    mean_of_terms(q_grid.iter().map(|&q| {
        let a = book.depth_price_at_quantity(Side::Ask, q).ok()? - best_ask;
        let b = best_bid - book.depth_price_at_quantity(Side::Bid, q).ok()?;
        (b != 0.0).then(|| a / b - 1.0)
    }))
}

/// Order quantity imbalance: ask over bid quantity within each relative
/// distance of the best price, minus one.
pub fn oiq(book: &OrderBook, d_grid_bps: &[f64]) -> ImbalanceValue {
    if book.best_ask().is_none() || book.best_bid().is_none() {
        return ImbalanceValue {
            value: None,
            skipped: d_grid_bps.len(),
        };
    }
    mean_of_terms(d_grid_bps.iter().map(|&d| {
        let a = book.quantity_within_distance(Side::Ask, d * 1e-4);
        let b = book.quantity_within_distance(Side::Bid, d * 1e-4);
        (b != 0.0).then(|| a / b - 1.0)
    }))
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (a + b > 0.0).then(|| (a - b) / (a + b))
}

/// Seller- minus buyer-initiated volume over their sum.
pub fn tiq(c: &FlowCounters) -> Option<f64> {
    ratio(c.traded_sell_qty, c.traded_buy_qty)
}

/// Same form with trade counts.
pub fn tic(c: &FlowCounters) -> Option<f64> {
    ratio(c.sell_trade_count as f64, c.buy_trade_count as f64)
}

/// Net ask submissions minus net bid submissions over their sum; undefined
/// unless the sum is positive.
pub fn tio(c: &FlowCounters) -> Option<f64> {
    let a = c.submitted_ask_qty - c.canceled_ask_qty;
    let b = c.submitted_bid_qty - c.canceled_bid_qty;
    ratio(a, b)
}

/// Mid return from the last tick at or before `t - delta` to the last tick
/// at or before `t`.
pub fn pret(ticks: &[Tick], t: i64, delta_ms: i64) -> Option<f64> {
    let now = last_at_or_before(ticks, t)?;
    let then = last_at_or_before(ticks, t - delta_ms)?;
    Some(ticks[now].mid() / ticks[then].mid() - 1.0)
}
