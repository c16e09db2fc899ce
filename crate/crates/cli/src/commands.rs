//! Subcommand bodies. Each writes its outputs and then a manifest.

use crate::config::{substream, Algo, EncoderKind, RunConfig};
use crate::manifest::{beside, files_in, Manifest, MANIFEST};
use crate::{BacktestArgs, CalibrateArgs, FeaturesArgs, PolicyArgs, PredictEvalArgs, ReconstructArgs, RecordArgs};
use crate::{SimulateArgs, SweepArgs, TrainArgs};
use anyhow::{bail, Context, Result};
use hftmm_core::agents::{AdaptiveSpread, FixedSpread, NullPolicy, ObservationEncoder};
use hftmm_core::backtest::{latency_sweep, run_backtest, write_report, write_sweep_report, LatencyAxis};
use hftmm_core::env::QuotingPolicy;
use hftmm_core::features::{self, compute_features, reconstruct_ticks, FeatureTable};
use hftmm_core::feed::{open_feed, open_snapshot, read_log, record_session, BookSnapshot, ReplayOptions, SegmentPaths};
use hftmm_core::plot::line_chart;
use hftmm_core::rl::{
    dqn_train, ppo_train, write_train_log, Checkpoint, GreedyNetPolicy, MarketEnvConfig, MarketMakingEnv, Mlp,
    TickFeed, TrainerKind,
};
use hftmm_core::sim::{calibrate as fit_params, generate, SimParams};
use hftmm_core::ticks::{read_ticks_file, write_ticks_file};
use hftmm_core::Tick;
use log::info;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn load_ticks(path: &Path) -> Result<Vec<Tick>> {
    let ticks = read_ticks_file(path).with_context(|| format!("reading ticks {}", path.display()))?;
    if ticks.is_empty() {
        bail!("{} holds no ticks", path.display());
    }
    Ok(ticks)
}

fn encoder(kind: EncoderKind) -> ObservationEncoder {
    match kind {
        EncoderKind::Naive => ObservationEncoder::default(),
        EncoderKind::SimAlpha => ObservationEncoder::with_sim_alpha(),
    }
}

pub fn record(config: &RunConfig, a: RecordArgs) -> Result<()> {
    let feed = open_feed(&a.feed, &a.product).context("opening feed")?;
    let mut snapshot = open_snapshot(&a.snapshot).context("opening snapshot source")?;
    let paths = SegmentPaths::in_dir(&a.out);
    let summary = record_session(feed, snapshot.as_mut(), &paths, Duration::from_secs(a.duration))?;
    info!("recorded {} messages with {} gaps", summary.message_count, summary.gap_count);
    let summary_path = a.out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;
    let mut m = Manifest::new("record", config);
    m.sources = vec![a.feed, a.snapshot];
    m.write(&files_in(&a.out)?, &a.out.join(MANIFEST))
}

pub fn reconstruct(mut config: RunConfig, a: ReconstructArgs) -> Result<()> {
    config.book.strict |= a.strict;
    let snapshot = BookSnapshot::read_file(&a.snapshot)?;
    let options = ReplayOptions {
        permissive: config.book.permissive_log,
    };
    let messages = read_log(&a.log, options)?;
    let r = reconstruct_ticks(&snapshot, &messages, config.book.book_config())?;
    create_parent(&a.emit_ticks)?;
    write_ticks_file(&a.emit_ticks, &r.ticks)?;
    println!(
        "messages {} applied {} stale {} warnings {} ticks {}",
        messages.len(),
        r.applied,
        r.stale,
        r.warnings,
        r.ticks.len()
    );
    let mut m = Manifest::new("reconstruct", &config);
    m.input(&a.snapshot)?;
    m.input(&a.log)?;
    m.write(&[a.emit_ticks.clone()], &beside(&a.emit_ticks))
}

fn read_params(path: &Path) -> Result<SimParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let params = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok(params)
}

pub fn simulate(config: &RunConfig, a: SimulateArgs) -> Result<()> {
    let seed = substream(config.seed, "sim");
    let params = match &a.params {
        Some(p) => SimParams {
            seed,
            ..read_params(p)?
        },
        None => config.sim.params(seed),
    };
    let ticks: Vec<Tick> = generate(&params, a.duration)?.iter().map(|t| t.tick()).collect();
    create_parent(&a.out)?;
    write_ticks_file(&a.out, &ticks)?;
    info!("{} ticks written to {}", ticks.len(), a.out.display());
    let mut m = Manifest::new("simulate", config);
    if let Some(p) = &a.params {
        m.input(p)?;
    }
    m.write(&[a.out.clone()], &beside(&a.out))
}

pub fn calibrate(config: &RunConfig, a: CalibrateArgs) -> Result<()> {
    let ticks = load_ticks(&a.ticks)?;
    let params = fit_params(&ticks)?;
    create_parent(&a.out)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&params)? + "\n")
        .with_context(|| format!("writing {}", a.out.display()))?;
    let mut m = Manifest::new("calibrate", config);
    m.input(&a.ticks)?;
    m.write(&[a.out.clone()], &beside(&a.out))
}

pub fn features(config: &RunConfig, a: FeaturesArgs) -> Result<()> {
    let options = ReplayOptions {
        permissive: config.book.permissive_log,
    };
    let messages = read_log(&a.log, options)?;
    let snapshot = match &a.snapshot {
        Some(p) => BookSnapshot::read_file(p)?,
        None => BookSnapshot {
            sequence: messages.first().map_or(0, |m| m.sequence.saturating_sub(1)),
            ..Default::default()
        },
    };
    let table = compute_features(&snapshot, &messages, &config.features, config.book.book_config())?;
    create_parent(&a.out)?;
    table.write_file(&a.out)?;
    let mut m = Manifest::new("features", config);
    m.input(&a.log)?;
    if let Some(p) = &a.snapshot {
        m.input(p)?;
    }
    m.write(&[a.out.clone()], &beside(&a.out))
}

pub fn predict_eval(config: &RunConfig, a: PredictEvalArgs) -> Result<()> {
    let table = FeatureTable::read_file(&a.features)?;
    let ticks = load_ticks(&a.ticks)?;
    let reports = features::predict_eval(&table, &ticks, &config.features.horizons_ms);
    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    for r in &reports {
        w.serialize(r)?;
    }
    w.flush()?;
    let series: Vec<(String, Vec<(f64, f64)>)> = table
        .columns
        .iter()
        .map(|c| {
            let pts = reports
                .iter()
                .filter(|r| &r.feature == c)
                .filter_map(|r| Some((r.horizon_ms as f64, r.r_squared?)))
                .collect();
            (c.clone(), pts)
        })
        .collect();
    let svg = a.out.with_extension("svg");
    std::fs::write(&svg, line_chart("R² by horizon", "horizon (ms)", "R²", &series))
        .with_context(|| format!("writing {}", svg.display()))?;
    let mut m = Manifest::new("predict-eval", config);
    m.input(&a.features)?;
    m.input(&a.ticks)?;
    m.write(&[a.out.clone(), svg], &beside(&a.out))
}

/// Stored in the checkpoint so evaluation rebuilds the same observation.
#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    algo: Algo,
    encoder: EncoderKind,
    schema: Vec<String>,
}

pub fn train(mut config: RunConfig, a: TrainArgs) -> Result<()> {
    let rl = &mut config.rl;
    rl.algo = a.algo.unwrap_or(rl.algo);
    config.agent.encoder = a.encoder.unwrap_or(config.agent.encoder);
    config.env.submit_ms = a.l_submit.unwrap_or(config.env.submit_ms);
    config.env.cancel_ms = a.l_cancel.unwrap_or(config.env.cancel_ms);
    if let Some(b) = a.budget {
        match rl.algo {
            Algo::Dqn => rl.dqn.total_steps = b,
            Algo::Ppo => rl.ppo.updates = b,
        }
    }
    rl.dqn.seed = substream(config.seed, "rl");
    rl.ppo.seed = substream(config.seed, "rl");
    let feed = match &a.ticks {
        Some(p) => TickFeed::Fixed(load_ticks(p)?.into()),
        None => {
            let params = config.sim.params(substream(config.seed, "train-ticks"));
            params.validate()?;
            TickFeed::Simulated {
                params,
                segment_ms: config.rl.segment_ms,
            }
        }
    };
    let env_config = MarketEnvConfig {
        session: config.env.session(false),
        max_episode_ticks: config.rl.max_episode_ticks,
        reward_scale: config.rl.reward_scale,
    };
    let mut env = MarketMakingEnv::new(feed, env_config, encoder(config.agent.encoder));
    let meta = serde_json::to_string(&CheckpointMeta {
        algo: config.rl.algo,
        encoder: config.agent.encoder,
        schema: env.encoder().schema(),
    })?;
    let (checkpoint, log) = match config.rl.algo {
        Algo::Dqn => {
            let out = dqn_train(&mut env, &config.rl.dqn)?;
            (out.checkpoint(&meta), out.log)
        }
        Algo::Ppo => {
            let out = ppo_train(&mut env, &config.rl.ppo)?;
            (out.checkpoint(&meta), out.log)
        }
    };
    info!("{} episodes logged", log.len());
    create_dir(&a.out)?;
    let ckpt = a.out.join("checkpoint.bin");
    checkpoint.write_file(&ckpt)?;
    let log_path = a.out.join("train_log.csv");
    let f = std::fs::File::create(&log_path).with_context(|| format!("writing {}", log_path.display()))?;
    write_train_log(&log, std::io::BufWriter::new(f))?;
    let mut m = Manifest::new("train", &config);
    if let Some(p) = &a.ticks {
        m.input(p)?;
    }
    m.write(&[ckpt, log_path], &a.out.join(MANIFEST))
}

type PolicyFactory = Box<dyn Fn() -> Box<dyn QuotingPolicy> + Sync>;

fn policy_factory(spec: &str, config: &RunConfig) -> Result<(String, PolicyFactory, Option<PathBuf>)> {
    let k = config.agent.adaptive_k;
    Ok(match spec {
        "null" => ("null".into(), Box::new(|| Box::new(NullPolicy) as Box<dyn QuotingPolicy>), None),
        "fixed" => ("fixed".into(), Box::new(|| Box::new(FixedSpread) as Box<dyn QuotingPolicy>), None),
        "adaptive" => ("adaptive".into(), Box::new(move || Box::new(AdaptiveSpread { k }) as Box<dyn QuotingPolicy>), None),
        path => {
            let path = PathBuf::from(path);
            let ckpt = Checkpoint::read_file(&path)
                .with_context(|| format!("policy {spec:?} is not fixed, adaptive, null or a readable checkpoint"))?;
            let meta: CheckpointMeta = serde_json::from_str(&ckpt.metadata).context("checkpoint metadata")?;
            let kind = meta.encoder;
            let dim = encoder(kind).dim();
            let net: Mlp = ckpt.net;
            if net.input_dim() != dim {
                bail!("checkpoint expects {} inputs, the {kind:?} encoder gives {dim}", net.input_dim());
            }
            let name = match ckpt.kind {
                TrainerKind::Dqn => "dqn",
                TrainerKind::Ppo => "ppo",
            };
            let factory: PolicyFactory =
                Box::new(move || Box::new(GreedyNetPolicy::new(net.clone(), encoder(kind))) as Box<dyn QuotingPolicy>);
            (name.into(), factory, Some(path))
        }
    })
}

fn test_ticks(config: &RunConfig, common: &PolicyArgs, m: &mut Manifest) -> Result<Arc<[Tick]>> {
    match &common.ticks {
        Some(p) => {
            m.input(p)?;
            Ok(load_ticks(p)?.into())
        }
        None => {
            let params = config.sim.params(substream(config.seed, "test-ticks"));
            let ticks: Arc<[Tick]> = generate(&params, config.backtest.duration_ms)?.iter().map(|t| t.tick()).collect();
            if ticks.is_empty() {
                bail!("simulated test stream is empty; raise backtest.duration_ms");
            }
            Ok(ticks)
        }
    }
}

pub fn backtest(mut config: RunConfig, a: BacktestArgs) -> Result<()> {
    config.env.submit_ms = a.l_submit.unwrap_or(config.env.submit_ms);
    config.env.cancel_ms = a.l_cancel.unwrap_or(config.env.cancel_ms);
    let mut m = Manifest::new("backtest", &config);
    let (name, make, ckpt) = policy_factory(&a.common.policy, &config)?;
    if let Some(p) = &ckpt {
        m.input(p)?;
    }
    let ticks = test_ticks(&config, &a.common, &mut m)?;
    let mut policy = make();
    let result = run_backtest(policy.as_mut(), ticks, config.env.session(a.trace));
    let out = &a.common.out;
    write_report(out, &[(name, &result)])?;
    if a.trace {
        let path = out.join("trace.jsonl");
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?,
        );
        for r in &result.outcome.trace {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    println!(
        "total reward {} over {} episodes",
        result.total_reward(),
        result.episodes().len()
    );
    m.write(&files_in(out)?, &out.join(MANIFEST))
}

pub fn sweep(config: &RunConfig, a: SweepArgs) -> Result<()> {
    let values = a.values.clone().unwrap_or_else(|| match a.axis {
        LatencyAxis::Submit => config.backtest.submit_sweep_ms.clone(),
        LatencyAxis::Cancel => config.backtest.cancel_sweep_ms.clone(),
    });
    if values.is_empty() {
        bail!("no latency values to sweep");
    }
    let mut m = Manifest::new("sweep", config);
    let (_, make, ckpt) = policy_factory(&a.common.policy, config)?;
    if let Some(p) = &ckpt {
        m.input(p)?;
    }
    let ticks = test_ticks(config, &a.common, &mut m)?;
    let result = latency_sweep(&*make, ticks, config.env.session(false), a.axis, &values);
    let out = &a.common.out;
    write_sweep_report(out, &result)?;
    match result.spearman_reward {
        Some(r) => println!("spearman(latency, cumulative reward) = {r}"),
        None => println!("spearman(latency, cumulative reward) undefined"),
    }
    m.write(&files_in(out)?, &out.join(MANIFEST))
}
