//! Policy evaluation over held-out tick streams, latency sweeps and reports.

use crate::env::{run_event_loop, EpisodeStats, QuotingPolicy, SessionConfig, SessionOutcome};
use crate::plot::{box_plot, line_chart, BoxStats};
use crate::types::Tick;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub struct BacktestResult {
    pub timestamps: Vec<i64>,
    /// Running reward after every tick.
    pub cumulative: Vec<f64>,
    pub outcome: SessionOutcome,
}

impl BacktestResult {
    pub fn total_reward(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn episodes(&self) -> &[EpisodeStats] {
        &self.outcome.episodes
    }

    pub fn mean_max_inventory(&self) -> Option<f64> {
        mean(self.episodes().iter().map(|e| e.max_abs_inventory))
    }

    pub fn mean_episode_reward(&self) -> Option<f64> {
        mean(self.episodes().iter().map(|e| e.reward))
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Runs `policy` over the whole stream as back-to-back episodes.
pub fn run_backtest(policy: &mut dyn QuotingPolicy, ticks: Arc<[Tick]>, config: SessionConfig) -> BacktestResult {
    let timestamps = ticks.iter().map(|t| t.timestamp_ms).collect();
    let outcome = run_event_loop(ticks, config, policy);
    BacktestResult {
        timestamps,
        cumulative: outcome.cumulative_rewards(),
        outcome,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyAxis {
    Submit,
    Cancel,
}

impl std::str::FromStr for LatencyAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "submit" => Ok(LatencyAxis::Submit),
            "cancel" => Ok(LatencyAxis::Cancel),
            _ => Err(format!("unknown latency axis {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub latency_ms: i64,
    pub cumulative_reward: f64,
    pub mean_episode_reward: Option<f64>,
    pub mean_max_inventory: Option<f64>,
    pub episodes: Vec<EpisodeStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: LatencyAxis,
    pub points: Vec<SweepPoint>,
    /// Rank correlation of latency with cumulative reward; `None` when it is
    /// undefined (fewer than two points or a constant series).
    pub spearman_reward: Option<f64>,
}

impl SweepResult {
    /// Whether mean per-episode max inventory never falls as latency rises.
    pub fn max_inventory_non_decreasing(&self) -> bool {
        let v: Vec<Option<f64>> = self.points.iter().map(|p| p.mean_max_inventory).collect();
        v.iter().all(Option::is_some) && v.windows(2).all(|w| w[1] >= w[0])
    }
}

/// One backtest per latency value with everything else fixed. Points run in
/// parallel; each gets a fresh policy from `make_policy`.
pub fn latency_sweep(
    make_policy: &(dyn Fn() -> Box<dyn QuotingPolicy> + Sync),
    ticks: Arc<[Tick]>,
    base: SessionConfig,
    axis: LatencyAxis,
    values_ms: &[i64],
) -> SweepResult {
    let points: Vec<SweepPoint> = values_ms
        .par_iter()
        .map(|&v| {
            let mut config = SessionConfig {
                record_trace: false,
                ..base
            };
            match axis {
                LatencyAxis::Submit => config.latency.submit_ms = v,
                LatencyAxis::Cancel => config.latency.cancel_ms = v,
            }
            let mut policy = make_policy();
            let r = run_backtest(policy.as_mut(), ticks.clone(), config);
            SweepPoint {
                latency_ms: v,
                cumulative_reward: r.total_reward(),
                mean_episode_reward: r.mean_episode_reward(),
                mean_max_inventory: r.mean_max_inventory(),
                episodes: r.outcome.episodes,
            }
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.latency_ms as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.cumulative_reward).collect();
    SweepResult {
        axis,
        spearman_reward: spearman(&xs, &ys),
        points,
    }
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub const EPISODE_HEADER: [&str; 11] = [
    "index",
    "start_ms",
    "end_ms",
    "duration_ms",
    "reward",
    "max_abs_inventory",
    "fills",
    "round_trips",
    "truncated",
    "start_tick",
    "end_tick",
];

pub fn write_episode_csv<W: Write>(episodes: &[EpisodeStats], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EPISODE_HEADER)?;
    for e in episodes {
        w.write_record([
            e.index.to_string(),
            e.start_ms.to_string(),
            e.end_ms.to_string(),
            e.duration_ms.to_string(),
            format!("{}", e.reward),
            format!("{}", e.max_abs_inventory),
            e.fills.to_string(),
            e.round_trips.to_string(),
            e.truncated.to_string(),
            e.start_tick.to_string(),
            e.end_tick.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write report to {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, ReportError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    create(path)?.write_all(text.as_bytes()).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes per-run episode CSVs, a box-plot summary CSV, the cumulative
/// reward series and SVG charts into `dir`.
pub fn write_report(dir: &Path, runs: &[(String, &BacktestResult)]) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for (name, r) in runs {
        write_episode_csv(r.episodes(), create(&dir.join(format!("{name}_episodes.csv")))?)?;
        let mut w = csv::Writer::from_writer(create(&dir.join(format!("{name}_cumulative.csv")))?);
        w.write_record(["timestamp_ms", "cumulative_reward"])?;
        for (t, c) in r.timestamps.iter().zip(&r.cumulative) {
            w.write_record([t.to_string(), format!("{c}")])?;
        }
        w.flush().map_err(csv::Error::from)?;
    }
    let mut w = csv::Writer::from_writer(create(&dir.join("summary.csv"))?);
    w.write_record(["run", "metric", "n", "min", "q1", "median", "q3", "max", "mean", "total_reward"])?;
    let mut reward_boxes = Vec::new();
    let mut inv_boxes = Vec::new();
    for (name, r) in runs {
        let metrics: [(&str, Vec<f64>); 3] = [
            ("reward", r.episodes().iter().map(|e| e.reward).collect()),
            ("duration_ms", r.episodes().iter().map(|e| e.duration_ms as f64).collect()),
            ("max_abs_inventory", r.episodes().iter().map(|e| e.max_abs_inventory).collect()),
        ];
        for (metric, values) in metrics {
            let Some(b) = BoxStats::from_values(&values) else { continue };
            w.write_record([
                name.clone(),
                metric.to_string(),
                b.n.to_string(),
                format!("{}", b.min),
                format!("{}", b.q1),
                format!("{}", b.median),
                format!("{}", b.q3),
                format!("{}", b.max),
                format!("{}", b.mean),
                format!("{}", r.total_reward()),
            ])?;
            match metric {
                "reward" => reward_boxes.push((name.clone(), b)),
                "max_abs_inventory" => inv_boxes.push((name.clone(), b)),
                _ => {}
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    let series: Vec<(String, Vec<(f64, f64)>)> = runs
        .iter()
        .map(|(name, r)| {
            let t0 = r.timestamps.first().copied().unwrap_or(0);
            let pts = r
                .timestamps
                .iter()
                .zip(&r.cumulative)
                .map(|(t, c)| ((t - t0) as f64 / 3.6e6, *c))
                .collect();
            (name.clone(), pts)
        })
        .collect();
    write_text(&dir.join("cumulative.svg"), &line_chart("Cumulative reward", "hours", "reward", &series))?;
    write_text(&dir.join("episode_reward_box.svg"), &box_plot("Reward per episode", "reward", &reward_boxes))?;
    write_text(
        &dir.join("episode_inventory_box.svg"),
        &box_plot("Max |inventory| per episode", "units", &inv_boxes),
    )?;
    Ok(())
}

pub fn write_sweep_report(dir: &Path, sweep: &SweepResult) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let axis = match sweep.axis {
        LatencyAxis::Submit => "submit",
        LatencyAxis::Cancel => "cancel",
    };
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    let mut w = csv::Writer::from_writer(create(&dir.join(format!("sweep_{axis}.csv")))?);
    w.write_record(["latency_ms", "cumulative_reward", "episodes", "mean_episode_reward", "mean_max_inventory"])?;
    for p in &sweep.points {
        w.write_record([
            p.latency_ms.to_string(),
            format!("{}", p.cumulative_reward),
            p.episodes.len().to_string(),
            opt(p.mean_episode_reward),
            opt(p.mean_max_inventory),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    let mut w = create(&dir.join(format!("sweep_{axis}_spearman.txt")))?;
    writeln!(w, "{}", sweep.spearman_reward.map_or("undefined".to_string(), |r| format!("{r}"))).map_err(|source| {
        ReportError::Io {
            path: dir.display().to_string(),
            source,
        }
    })?;
    let reward: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.latency_ms as f64, p.cumulative_reward)).collect();
    write_text(
        &dir.join(format!("sweep_{axis}_reward.svg")),
        &line_chart(&format!("{axis} latency sweep"), "latency (ms)", "cumulative reward", &[("reward".into(), reward)]),
    )?;
    let groups: Vec<(String, BoxStats)> = sweep
        .points
        .iter()
        .filter_map(|p| {
            let v: Vec<f64> = p.episodes.iter().map(|e| e.max_abs_inventory).collect();
            BoxStats::from_values(&v).map(|b| (format!("{} ms", p.latency_ms), b))
        })
        .collect();
    write_text(
        &dir.join(format!("sweep_{axis}_inventory_box.svg")),
        &box_plot(&format!("Max |inventory| per episode, {axis} latency"), "units", &groups),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{FixedSpread, NullPolicy};

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0], &[3.0]), None);
        assert_eq!(spearman(&[1.0, 2.0], &[3.0, 3.0]), None);
    }

    fn ticks() -> Arc<[Tick]> {
        (0..3000)
            .map(|i| {
                let m = 100.0 + 0.1 * (i as f64 * 0.7).sin();
                Tick {
                    timestamp_ms: i * 20,
                    best_bid: m - 0.005,
                    best_ask: m + 0.005,
                }
            })
            .collect()
    }

    #[test]
    fn null_policy_backtest() {
        let r = run_backtest(&mut NullPolicy, ticks(), SessionConfig::default());
        assert_eq!(r.total_reward(), 0.0);
        assert_eq!(r.episodes().len(), 1);
        assert!(r.episodes()[0].truncated);
        assert_eq!(r.cumulative.len(), r.timestamps.len());
    }

    #[test]
    fn single_point_sweep_has_no_correlation() {
        let make = || -> Box<dyn QuotingPolicy> { Box::new(FixedSpread) };
        let s = latency_sweep(&make, ticks(), SessionConfig::default(), LatencyAxis::Submit, &[10]);
        assert_eq!(s.points.len(), 1);
        assert_eq!(s.spearman_reward, None);
    }

    #[test]
    fn report_files_are_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            let r = run_backtest(&mut FixedSpread, ticks(), SessionConfig::default());
            write_report(d.path(), &[("fixed".into(), &r)]).unwrap();
        }
        for f in ["fixed_episodes.csv", "fixed_cumulative.csv", "summary.csv", "cumulative.svg", "episode_reward_box.svg"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
            assert!(!x.is_empty());
        }
    }

    #[test]
    fn empty_stats_give_header_only() {
        let mut buf = Vec::new();
        write_episode_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), EPISODE_HEADER.join(","));
    }
}
