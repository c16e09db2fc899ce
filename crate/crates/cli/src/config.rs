//! Run configuration: TOML file, then `--set` overrides, then subcommand flags.

use anyhow::{bail, Context, Result};
use hftmm_core::book::{BookConfig, Precision};
use hftmm_core::env::{FillRule, LatencyConfig, SessionConfig};
use hftmm_core::features::FeatureConfig;
use hftmm_core::rl::{DqnConfig, MarketEnvConfig, PpoConfig};
use hftmm_core::sim::{lognormal_from_moments, DriftParams, SimParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Every random stream is derived from this value.
    pub seed: u64,
    /// Used when a subcommand is not given an explicit output path.
    pub out_dir: String,
    pub sim: SimSection,
    pub book: BookSection,
    pub env: EnvSection,
    pub agent: AgentSection,
    pub rl: RlSection,
    pub features: FeatureConfig,
    pub backtest: BacktestSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: "out".into(),
            sim: SimSection::default(),
            book: BookSection::default(),
            env: EnvSection::default(),
            agent: AgentSection::default(),
            rl: RlSection::default(),
            features: FeatureConfig::default(),
            backtest: BacktestSection::default(),
        }
    }
}

/// Generator parameters in arithmetic units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub interval_mean_ms: f64,
    pub interval_sd_ms: f64,
    pub spread_mean_bps: f64,
    pub spread_sd_bps: f64,
    /// Per-ms standard deviation of the price-change factor.
    pub dp_sigma: f64,
    pub p0: f64,
    /// Stationary sd of an Ornstein-Uhlenbeck drift on the return rate; 0 disables it.
    pub drift_sigma: f64,
    pub drift_tau_ms: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let p = SimParams::fast_feed();
        SimSection {
            interval_mean_ms: 7.0,
            interval_sd_ms: 20.0,
            spread_mean_bps: 0.8,
            spread_sd_bps: 0.5,
            dp_sigma: p.dp_sigma,
            p0: p.p0,
            drift_sigma: 0.0,
            drift_tau_ms: 1000.0,
        }
    }
}

impl SimSection {
    pub fn params(&self, seed: u64) -> SimParams {
        let (dt_mu, dt_sigma) = lognormal_from_moments(self.interval_mean_ms, self.interval_sd_ms);
        let (spread_mu, spread_sigma) = lognormal_from_moments(self.spread_mean_bps * 1e-4, self.spread_sd_bps * 1e-4);
        SimParams {
            dt_mu,
            dt_sigma,
            dp_sigma: self.dp_sigma,
            spread_mu,
            spread_sigma,
            p0: self.p0,
            seed,
            drift: (self.drift_sigma > 0.0).then_some(DriftParams {
                sigma: self.drift_sigma,
                tau_ms: self.drift_tau_ms,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BookSection {
    pub price_decimals: u32,
    pub size_decimals: u32,
    /// Treat unknown ids, oversize matches and crossing opens as errors.
    pub strict: bool,
    /// Accept log sequences that fail to increase.
    pub permissive_log: bool,
}

impl Default for BookSection {
    fn default() -> Self {
        let p = Precision::default();
        BookSection {
            price_decimals: p.price_decimals,
            size_decimals: p.size_decimals,
            strict: false,
            permissive_log: false,
        }
    }
}

impl BookSection {
    pub fn book_config(&self) -> BookConfig {
        BookConfig {
            precision: Precision {
                price_decimals: self.price_decimals,
                size_decimals: self.size_decimals,
            },
            strict: self.strict,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub submit_ms: i64,
    pub cancel_ms: i64,
    pub fill_rule: FillRule,
    pub i_max: f64,
    /// Inventory penalty per unit per tick.
    pub lambda: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let s = SessionConfig::default();
        EnvSection {
            submit_ms: 10,
            cancel_ms: 20,
            fill_rule: s.fill_rule,
            i_max: s.i_max,
            lambda: s.lambda,
        }
    }
}

impl EnvSection {
    pub fn session(&self, record_trace: bool) -> SessionConfig {
        SessionConfig {
            latency: LatencyConfig::new(self.submit_ms, self.cancel_ms),
            fill_rule: self.fill_rule,
            i_max: self.i_max,
            lambda: self.lambda,
            record_trace,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Quote distances, order states, inventory and entry price only.
    #[default]
    Naive,
    /// Adds past mid returns and the agent's own trade imbalance.
    SimAlpha,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub encoder: EncoderKind,
    /// Inventory skew of the adaptive baseline.
    pub adaptive_k: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            encoder: EncoderKind::Naive,
            adaptive_k: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Dqn,
    #[default]
    Ppo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    pub algo: Algo,
    /// Length of each simulated training segment.
    pub segment_ms: i64,
    pub max_episode_ticks: usize,
    pub reward_scale: f64,
    /// The `seed` fields below are replaced by substreams of the global seed.
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
}

impl Default for RlSection {
    fn default() -> Self {
        let env = MarketEnvConfig::default();
        RlSection {
            algo: Algo::Ppo,
            segment_ms: 15 * 60_000,
            max_episode_ticks: env.max_episode_ticks,
            reward_scale: env.reward_scale,
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    /// Length of the simulated test stream when no tick file is given.
    pub duration_ms: i64,
    pub submit_sweep_ms: Vec<i64>,
    pub cancel_sweep_ms: Vec<i64>,
}

impl Default for BacktestSection {
    fn default() -> Self {
        BacktestSection {
            duration_ms: 10 * 3_600_000,
            submit_sweep_ms: vec![10, 20, 30, 40],
            cancel_sweep_ms: vec![20, 40, 60, 80],
        }
    }
}

/// Seed of the named substream: the first eight bytes of
/// `sha256(seed_le || name)`, little-endian.
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Parses `section.key=value`; the value is read as TOML and falls back to a
/// bare string.
fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .with_context(|| format!("--set {assignment:?}: expected key=value"))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one item");
    let mut cur = table;
    for k in parents {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("--set {assignment:?}: {k} is not a section"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    for s in sets {
        apply_set(&mut table, s)?;
    }
    let config: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
    config.features.validate()?;
    Ok(config)
}
