//! Cash-flow bookkeeping used as the mark-to-market oracle.

use hftmm_core::accounting::{step_reward, Portfolio};
use hftmm_core::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, Default)]
pub struct CashBook {
    pub cash: f64,
    pub inventory: f64,
}

impl CashBook {
    pub fn fill(&mut self, side: Side, price: f64, qty: f64) {
        match side {
            Side::Bid => {
                self.cash -= price * qty;
                self.inventory += qty;
            }
            Side::Ask => {
                self.cash += price * qty;
                self.inventory -= qty;
            }
        }
    }

    pub fn mtm(&self, mid: f64) -> f64 {
        self.cash + self.inventory * mid
    }
}

/// `|a - b| / max(|b|, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AccountingCheck {
    /// Worst relative gap between equity and the cash oracle at any step.
    pub max_value_err: f64,
    /// Worst relative gap between summed rewards (lambda 0) and final equity.
    pub max_telescope_err: f64,
    pub fills: usize,
}

/// Random fills against a random-walk mid; compares incremental equity with
/// the cash oracle after every step.
pub fn check_sequences(seed: u64, sequences: usize) -> AccountingCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = AccountingCheck::default();
    for _ in 0..sequences {
        let i_max = rng.gen_range(1..6) as f64;
        let mut p = Portfolio::new(i_max);
        let mut cash = CashBook::default();
        let mut mid = rng.gen_range(100.0..30_000.0);
        let mut total = 0.0;
        for _ in 0..rng.gen_range(1..60) {
            let prev = p;
            let prev_mid = mid;
            mid *= 1.0 + rng.gen_range(-5e-4..5e-4);
            if rng.gen_bool(0.6) {
                let side = if rng.gen_bool(0.5) { Side::Bid } else { Side::Ask };
                let qty = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.05..2.0) };
                let price = mid * (1.0 + rng.gen_range(-3e-4..3e-4));
                if p.can_fill(side, qty) {
                    p.apply_fill(side, price, qty).expect("cap checked");
                    cash.fill(side, price, qty);
                    out.fills += 1;
                }
            }
            total += step_reward(&prev, &p, prev_mid, mid, 0.0).total();
            let v = p.equity(mid);
            out.max_value_err = out.max_value_err.max(rel_err(v, cash.mtm(mid)));
        }
        out.max_telescope_err = out.max_telescope_err.max(rel_err(total, cash.mtm(mid)));
    }
    out
}
