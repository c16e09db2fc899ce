//! The trading session seen as an episodic RL environment.

use super::{argmax, Environment, Mlp, Step};
use crate::agents::{quote_for, ActionPair, ObservationEncoder, ACTION_COUNT};
use crate::env::{DecisionView, QuoteAction, QuotingPolicy, Session, SessionConfig};
use crate::sim::{generate, SimParams};
use crate::types::Tick;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub enum TickFeed {
    /// One stream; the environment is exhausted at its end.
    Fixed(Arc<[Tick]>),
    /// Endless simulated segments of `segment_ms`; segment `k` uses seed
    /// `params.seed + k`.
    Simulated { params: SimParams, segment_ms: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketEnvConfig {
    pub session: SessionConfig,
    /// Ticks after which a running episode is cut off for training. The
    /// underlying session keeps going.
    pub max_episode_ticks: usize,
    /// Multiplier applied to rewards handed to the learner.
    pub reward_scale: f64,
}

impl Default for MarketEnvConfig {
    fn default() -> Self {
        MarketEnvConfig {
            session: SessionConfig {
                record_trace: false,
                ..Default::default()
            },
            max_episode_ticks: 50_000,
            reward_scale: 1.0,
        }
    }
}

/// Each step applies one action from the 100-way grid at a decision tick
/// and runs the session to the next decision. The step reward is the sum of
/// per-tick rewards in between.
pub struct MarketMakingEnv {
    feed: TickFeed,
    config: MarketEnvConfig,
    encoder: ObservationEncoder,
    session: Option<Session>,
    segment: u64,
    /// First observation of the episode that follows a finished one.
    pending: Option<Vec<f64>>,
    last_obs: Vec<f64>,
    cut_at: usize,
}

impl MarketMakingEnv {
    pub fn new(feed: TickFeed, config: MarketEnvConfig, encoder: ObservationEncoder) -> Self {
        MarketMakingEnv {
            feed,
            config,
            encoder,
            session: None,
            segment: 0,
            pending: None,
            last_obs: Vec::new(),
            cut_at: 0,
        }
    }

    pub fn encoder(&self) -> &ObservationEncoder {
        &self.encoder
    }

    fn next_stream(&mut self) -> Option<Arc<[Tick]>> {
        let k = self.segment;
        self.segment += 1;
        match &self.feed {
            TickFeed::Fixed(t) => (k == 0).then(|| t.clone()),
            TickFeed::Simulated { params, segment_ms } => {
                let p = SimParams {
                    seed: params.seed.wrapping_add(k),
                    ..params.clone()
                };
                let ticks = generate(&p, *segment_ms).expect("simulation parameters validated");
                Some(ticks.iter().map(|t| t.tick()).collect())
            }
        }
    }

    fn encode(&mut self) -> Vec<f64> {
        let session = self.session.as_ref().expect("session running");
        let obs = self.encoder.encode(&session.view()).to_vector();
        self.last_obs = obs.clone();
        obs
    }

    fn ticks_in_episode(&self) -> usize {
        self.session.as_ref().map_or(0, |s| s.episode_ticks())
    }
}

impl Environment for MarketMakingEnv {
    fn obs_dim(&self) -> usize {
        self.encoder.dim()
    }

    fn action_count(&self) -> usize {
        ACTION_COUNT
    }

    fn reset(&mut self) -> Option<Vec<f64>> {
        if let Some(obs) = self.pending.take() {
            self.cut_at = self.ticks_in_episode();
            return Some(obs);
        }
        loop {
            let ticks = self.next_stream()?;
            let mut session = Session::new(ticks, self.config.session);
            if session.advance().is_some() {
                self.session = Some(session);
                self.cut_at = 0;
                return Some(self.encode());
            }
        }
    }

    fn step(&mut self, action: usize) -> Step {
        let a = ActionPair::from_index(action).expect("action index within the grid");
        let session = self.session.as_mut().expect("step after reset");
        let quote = quote_for(a, session.view().tick);
        session.act(quote);
        let before = session.episode_count();
        let next = session.advance();
        let reward = session.take_reward() * self.config.reward_scale;
        let done = session.episodes()[before..].iter().any(|e| !e.truncated);
        if next.is_none() {
            self.session = None;
            return Step {
                obs: self.last_obs.clone(),
                reward,
                done,
                truncated: !done,
            };
        }
        let obs = self.encode();
        let cut = !done && self.ticks_in_episode() >= self.cut_at + self.config.max_episode_ticks;
        if done || cut {
            self.pending = Some(obs.clone());
        }
        Step {
            obs,
            reward,
            done,
            truncated: cut,
        }
    }
}

/// Quotes the action with the highest network output among the first 100.
pub struct GreedyNetPolicy {
    pub net: Mlp,
    pub encoder: ObservationEncoder,
    buf: Vec<f64>,
}

impl GreedyNetPolicy {
    pub fn new(net: Mlp, encoder: ObservationEncoder) -> Self {
        assert!(net.output_dim() >= ACTION_COUNT, "network must score all 100 actions");
        assert_eq!(net.input_dim(), encoder.dim(), "network input must match the observation");
        GreedyNetPolicy {
            net,
            encoder,
            buf: Vec::new(),
        }
    }
}

impl QuotingPolicy for GreedyNetPolicy {
    fn quote(&mut self, view: &DecisionView<'_>) -> QuoteAction {
        self.encoder.encode(view).write_vector(&mut self.buf);
        let out = self.net.forward(&self.buf).expect("dimension checked at construction");
        let a = argmax(&out[..ACTION_COUNT]);
        quote_for(ActionPair::from_index(a).expect("argmax within the grid"), view.tick)
    }
}
