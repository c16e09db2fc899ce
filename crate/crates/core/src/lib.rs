//! Latency-aware tick-level market making laboratory.
//!
//! The pipeline runs from raw level-3 feed capture ([`feed`]) through book
//! reconstruction ([`book`], [`flow`]) and synthetic tick generation
//! ([`sim`]) to a latency-aware exchange ([`env`]), portfolio accounting
//! ([`accounting`]), quoting agents ([`agents`], [`rl`]), alpha features
//! ([`features`]) and evaluation ([`backtest`]).

pub mod accounting;
pub mod agents;
pub mod backtest;
pub mod book;
pub mod env;
pub mod flow;
pub mod plot;
pub mod rl;
pub mod sim;
pub mod feed;
pub mod features;
pub mod ticks;
pub mod types;

pub use types::{Side, Tick, TickError, TopOfBook};
