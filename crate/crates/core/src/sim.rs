//! Synthetic top-of-book generator and its calibration from recorded ticks.
//!
//! Inter-tick intervals and relative spreads are log-normal; the mid follows
//! a multiplicative random walk whose step scales with the elapsed interval.

use crate::types::Tick;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Mean-reverting drift added to the per-ms return rate. Off unless set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftParams {
    /// Stationary standard deviation of the drift rate (per ms).
    pub sigma: f64,
    /// Decay time constant in ms.
    pub tau_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Log-space mean of the inter-tick interval in ms.
    pub dt_mu: f64,
    pub dt_sigma: f64,
    /// Standard deviation of the per-ms price-change factor.
    pub dp_sigma: f64,
    /// Log-space mean of the relative spread.
    pub spread_mu: f64,
    pub spread_sigma: f64,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftParams>,
}

fn default_p0() -> f64 {
    20_000.0
}

/// Log-normal `(mu, sigma)` with the given arithmetic mean and sd.
pub fn lognormal_from_moments(mean: f64, sd: f64) -> (f64, f64) {
    let var = (1.0 + (sd / mean).powi(2)).ln();
    (mean.ln() - var / 2.0, var.sqrt())
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams::test_stream()
    }
}

impl SimParams {
    /// Interval statistics of a fast feed (mean 7 ms, sd 20 ms) with a
    /// 0.8 bps mean spread (sd 0.5 bps). The price factor sd gives roughly
    /// 0.8% hourly volatility.
    pub fn fast_feed() -> Self {
        let (dt_mu, dt_sigma) = lognormal_from_moments(7.0, 20.0);
        let (spread_mu, spread_sigma) = lognormal_from_moments(0.8e-4, 0.5e-4);
        SimParams {
            dt_mu,
            dt_sigma,
            dp_sigma: 5.0e-7,
            spread_mu,
            spread_sigma,
            p0: default_p0(),
            seed: 0,
            drift: None,
        }
    }

    /// 150 ms mean interval: about 240,000 ticks in ten hours.
    pub fn test_stream() -> Self {
        let (dt_mu, dt_sigma) = lognormal_from_moments(150.0, 150.0);
        SimParams {
            dt_mu,
            dt_sigma,
            ..SimParams::fast_feed()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let finite = [self.dt_mu, self.dt_sigma, self.dp_sigma, self.spread_mu, self.spread_sigma, self.p0]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(SimError::InvalidParams("non-finite parameter".into()));
        }
        if self.dt_sigma < 0.0 || self.dp_sigma < 0.0 || self.spread_sigma < 0.0 {
            return Err(SimError::InvalidParams("standard deviations must be >= 0".into()));
        }
        if self.p0 <= 0.0 {
            return Err(SimError::InvalidParams(format!("p0 must be > 0, got {}", self.p0)));
        }
        if let Some(d) = self.drift {
            if !(d.sigma >= 0.0 && d.tau_ms > 0.0) {
                return Err(SimError::InvalidParams("drift needs sigma >= 0 and tau_ms > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("need at least 2 ticks to calibrate, got {0}")]
    TooFewTicks(usize),
    #[error("tick {index}: timestamp does not advance ({delta} ms)")]
    NonIncreasingTime { index: usize, delta: i64 },
    #[error("tick {index}: non-positive spread")]
    NonPositiveSpread { index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTick {
    pub timestamp_ms: i64,
    pub mid: f64,
    pub best_bid: f64,
    pub best_ask: f64,
}

impl SimTick {
    pub fn from_mid(timestamp_ms: i64, mid: f64, spread: f64) -> Self {
        SimTick {
            timestamp_ms,
            mid,
            best_bid: mid * (1.0 - spread / 2.0),
            best_ask: mid * (1.0 + spread / 2.0),
        }
    }

    pub fn tick(&self) -> Tick {
        Tick {
            timestamp_ms: self.timestamp_ms,
            best_bid: self.best_bid,
            best_ask: self.best_ask,
        }
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// One inter-tick interval in ms (continuous).
pub fn sample_interval(params: &SimParams, rng: &mut impl Rng) -> f64 {
    (params.dt_mu + params.dt_sigma * normal(rng)).exp()
}

/// One relative spread.
pub fn sample_spread(params: &SimParams, rng: &mut impl Rng) -> f64 {
    (params.spread_mu + params.spread_sigma * normal(rng)).exp()
}

/// Mid after a step with a given price-change factor.
pub fn apply_step(p_prev: f64, dp: f64, dt: f64) -> f64 {
    p_prev * (1.0 + dp * dt)
}

/// Random-walk step; draws are repeated until the multiplier is positive.
pub fn step_mid(p_prev: f64, dt: f64, params: &SimParams, rng: &mut impl Rng) -> f64 {
    step_mid_with_drift(p_prev, dt, params.dp_sigma, 0.0, rng)
}

fn step_mid_with_drift(p_prev: f64, dt: f64, dp_sigma: f64, drift: f64, rng: &mut impl Rng) -> f64 {
    loop {
        let dp = drift + dp_sigma * normal(rng);
        if 1.0 + dp * dt > 0.0 {
            return apply_step(p_prev, dp, dt);
        }
    }
}

/// Streaming generator. Timestamps are whole milliseconds: each continuous
/// interval is rounded up, with a floor of 1 ms, and the rounded interval
/// also drives the price step.
pub struct MarketSim {
    params: SimParams,
    rng: ChaCha8Rng,
    clock_ms: i64,
    mid: f64,
    drift: f64,
}

impl MarketSim {
    pub fn new(params: SimParams) -> Result<Self, SimError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let drift = match params.drift {
            Some(d) => d.sigma * normal(&mut rng),
            None => 0.0,
        };
        Ok(MarketSim {
            params,
            rng,
            clock_ms: 0,
            mid: params.p0,
            drift,
        })
    }

    pub fn next_tick(&mut self) -> SimTick {
        let dt = sample_interval(&self.params, &mut self.rng).ceil().max(1.0);
        self.clock_ms += dt as i64;
        if let Some(d) = self.params.drift {
            let decay = (-dt / d.tau_ms).exp();
            self.drift = self.drift * decay + d.sigma * (1.0 - decay * decay).sqrt() * normal(&mut self.rng);
        }
        self.mid = step_mid_with_drift(self.mid, dt, self.params.dp_sigma, self.drift, &mut self.rng);
        let spread = sample_spread(&self.params, &mut self.rng);
        SimTick::from_mid(self.clock_ms, self.mid, spread)
    }
}

/// All ticks with timestamp at or below `duration_ms`.
pub fn generate(params: &SimParams, duration_ms: i64) -> Result<Vec<SimTick>, SimError> {
    let mut sim = MarketSim::new(*params)?;
    let mut out = Vec::new();
    loop {
        let t = sim.next_tick();
        if t.timestamp_ms > duration_ms {
            return Ok(out);
        }
        out.push(t);
    }
}

/// Mean and population standard deviation.
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits the generator parameters to a tick stream. `p0` is the first mid and
/// `seed` is left at 0.
pub fn calibrate(ticks: &[Tick]) -> Result<SimParams, SimError> {
    if ticks.len() < 2 {
        return Err(SimError::TooFewTicks(ticks.len()));
    }
    let mut log_dt = Vec::with_capacity(ticks.len() - 1);
    let mut rates = Vec::with_capacity(ticks.len() - 1);
    for (i, w) in ticks.windows(2).enumerate() {
        let delta = w[1].timestamp_ms - w[0].timestamp_ms;
        if delta <= 0 {
            return Err(SimError::NonIncreasingTime { index: i + 1, delta });
        }
        log_dt.push((delta as f64).ln());
        rates.push((w[1].mid() / w[0].mid() - 1.0) / delta as f64);
    }
    let mut log_spread = Vec::with_capacity(ticks.len());
    for (i, t) in ticks.iter().enumerate() {
        let s = (t.best_ask - t.best_bid) / t.best_bid;
        if !(s > 0.0) {
            return Err(SimError::NonPositiveSpread { index: i });
        }
        log_spread.push(s.ln());
    }
    let (dt_mu, dt_sigma) = mean_sd(&log_dt);
    let (spread_mu, spread_sigma) = mean_sd(&log_spread);
    let (_, dp_sigma) = mean_sd(&rates);
    Ok(SimParams {
        dt_mu,
        dt_sigma,
        dp_sigma,
        spread_mu,
        spread_sigma,
        p0: ticks[0].mid(),
        seed: 0,
        drift: None,
    })
}
