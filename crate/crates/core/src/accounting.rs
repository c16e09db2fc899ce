//! Inventory, entry price, realized PnL and the inventory-penalized reward.
//!
//! Only the position-reducing part of a fill realizes PnL against the entry
//! price; the opening part moves the entry price as a size-weighted average.
//! With that split `V = I * (mid - EP) + M` always equals cash plus inventory
//! marked at the mid.

use crate::types::Side;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AccountingError {
    #[error("fill of {qty} on {side} would move inventory {inventory} beyond cap {i_max}")]
    CapBreach {
        side: Side,
        qty: f64,
        inventory: f64,
        i_max: f64,
    },
    #[error("fill needs positive finite price and quantity, got {price} x {qty}")]
    InvalidFill { price: f64, qty: f64 },
}

/// Execution of one of the agent's orders. A bid fill buys, an ask fill sells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub side: Side,
    pub price: f64,
    pub qty: f64,
    pub at_ms: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub inventory: f64,
    pub i_max: f64,
    /// Average opening price of the current position; 0 when flat.
    pub entry_price: f64,
    /// Realized PnL.
    pub realized: f64,
}

impl Portfolio {
    pub fn new(i_max: f64) -> Self {
        Portfolio {
            inventory: 0.0,
            i_max,
            entry_price: 0.0,
            realized: 0.0,
        }
    }

    pub fn inventory_ratio(&self) -> f64 {
        self.inventory / self.i_max
    }

    pub fn is_flat(&self) -> bool {
        self.inventory == 0.0
    }

    pub fn equity(&self, mid: f64) -> f64 {
        self.inventory * (mid - self.entry_price) + self.realized
    }

    /// Whether one more unit on `side` stays within the cap.
    pub fn can_fill(&self, side: Side, qty: f64) -> bool {
        let next = match side {
            Side::Bid => self.inventory + qty,
            Side::Ask => self.inventory - qty,
        };
        next.abs() <= self.i_max
    }

    pub fn apply_fill(&mut self, side: Side, price: f64, qty: f64) -> Result<(), AccountingError> {
        if !(price > 0.0 && price.is_finite() && qty > 0.0 && qty.is_finite()) {
            return Err(AccountingError::InvalidFill { price, qty });
        }
        if !self.can_fill(side, qty) {
            return Err(AccountingError::CapBreach {
                side,
                qty,
                inventory: self.inventory,
                i_max: self.i_max,
            });
        }
        // Signed quantity: +qty for a buy, -qty for a sell.
        let signed = match side {
            Side::Bid => qty,
            Side::Ask => -qty,
        };
        let reducing = if self.inventory * signed < 0.0 {
            qty.min(self.inventory.abs())
        } else {
            0.0
        };
        if reducing > 0.0 {
            self.realized += match side {
                Side::Bid => reducing * (self.entry_price - price),
                Side::Ask => reducing * (price - self.entry_price),
            };
            self.inventory += signed.signum() * reducing;
        }
        let opening = qty - reducing;
        if opening > 0.0 {
            let held = self.inventory.abs();
            self.entry_price = (held * self.entry_price + opening * price) / (held + opening);
            self.inventory += signed.signum() * opening;
        }
        if self.inventory == 0.0 {
            self.entry_price = 0.0;
        }
        Ok(())
    }
}

/// Reward of one step split into the three parts of the decomposition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Change of the unrealized term `I * (mid - EP)`.
    pub holding: f64,
    /// Change of realized PnL.
    pub spread: f64,
    /// `lambda * |I|` after the step; subtracted.
    pub penalty: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.holding + self.spread - self.penalty
    }
}

pub fn step_reward(
    prev: &Portfolio,
    next: &Portfolio,
    mid_prev: f64,
    mid_next: f64,
    lambda: f64,
) -> RewardBreakdown {
    let unrealized = |p: &Portfolio, mid: f64| p.inventory * (mid - p.entry_price);
    RewardBreakdown {
        holding: unrealized(next, mid_next) - unrealized(prev, mid_prev),
        spread: next.realized - prev.realized,
        penalty: lambda * next.inventory.abs(),
    }
}
