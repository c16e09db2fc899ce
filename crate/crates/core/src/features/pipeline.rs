//! Feature extraction over a recorded log and the regression sweep.

use super::{oid, oiq, pret, tic, tio, tiq, FeatureConfig, RegressionReport};
use super::ols::OlsAccumulator;
use crate::agents::AlphaSource;
use crate::book::{ApplyOutcome, BookConfig, BookError, OrderBook};
use crate::env::DecisionView;
use crate::feed::{BookSnapshot, Level3Message};
use crate::flow::FlowIndex;
use crate::ticks::last_at_or_before;
use crate::types::Tick;
use std::io::{Read, Write};
use std::path::Path;

/// Top-of-book series from replaying `messages` onto `snapshot`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Reconstruction {
    pub ticks: Vec<Tick>,
    pub applied: usize,
    pub stale: usize,
    pub warnings: usize,
}

/// Replays the log and emits one tick per millisecond in which the best
/// quotes changed, stamped with that millisecond and carrying the quotes
/// after its last message.
pub fn reconstruct_ticks(
    snapshot: &BookSnapshot,
    messages: &[Level3Message],
    config: BookConfig,
) -> Result<Reconstruction, BookError> {
    let mut book = OrderBook::from_snapshot(snapshot, config)?;
    let mut out = Reconstruction::default();
    let mut last: Option<(f64, f64)> = None;
    for (i, m) in messages.iter().enumerate() {
        match book.apply(m)? {
            ApplyOutcome::Applied => out.applied += 1,
            ApplyOutcome::Stale => out.stale += 1,
            ApplyOutcome::Warned(_) => out.warnings += 1,
        }
        let ms_done = messages.get(i + 1).map_or(true, |n| n.timestamp_ms != m.timestamp_ms);
        if !ms_done {
            continue;
        }
        if let Some(top) = book.top(m.timestamp_ms) {
            let key = (top.best_bid, top.best_ask);
            let advances = out.ticks.last().map_or(true, |t| t.timestamp_ms < m.timestamp_ms);
            if last != Some(key) && advances {
                out.ticks.push(top);
                last = Some(key);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureTableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

/// Wide table: one row per sampling time, one column per feature.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub timestamps: Vec<i64>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl FeatureTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn values(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        self.rows.iter().map(move |r| r[col])
    }

    /// Index of the last row stamped at or before `t`.
    pub fn row_at_or_before(&self, t: i64) -> Option<usize> {
        self.timestamps.partition_point(|&x| x <= t).checked_sub(1)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureTableError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp_ms".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in self.timestamps.iter().zip(&self.rows) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.map_or_else(String::new, |x| format!("{x}"))));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureTableError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("timestamp_ms") {
            return Err(FeatureTableError::Format("first column must be timestamp_ms".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut table = FeatureTable {
            columns,
            ..Default::default()
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| FeatureTableError::Format(format!("row {}: bad {what}", i + 2));
            let t: i64 = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("timestamp"))?;
            let mut row = Vec::with_capacity(table.columns.len());
            for cell in rec.iter().skip(1) {
                row.push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<f64>().map_err(|_| bad(cell))?)
                });
            }
            if row.len() != table.columns.len() {
                return Err(bad("column count"));
            }
            if table.timestamps.last().is_some_and(|&p| p >= t) {
                return Err(bad("timestamp order"));
            }
            table.timestamps.push(t);
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), FeatureTableError> {
        let f = std::fs::File::create(path.as_ref()).map_err(csv::Error::from)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, FeatureTableError> {
        let f = std::fs::File::open(path.as_ref()).map_err(csv::Error::from)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Samples every feature on a regular grid. Row `t` only uses messages
/// stamped at or before `t`.
pub fn compute_features(
    snapshot: &BookSnapshot,
    messages: &[Level3Message],
    config: &FeatureConfig,
    book_config: BookConfig,
) -> Result<FeatureTable, BookError> {
    let mut table = FeatureTable {
        columns: config.columns(),
        ..Default::default()
    };
    let (Some(first), Some(last)) = (
        messages.iter().map(|m| m.timestamp_ms).min(),
        messages.iter().map(|m| m.timestamp_ms).max(),
    ) else {
        return Ok(table);
    };
    let flow = FlowIndex::new(messages, book_config.precision);
    let mut book = OrderBook::from_snapshot(snapshot, book_config)?;
    let mut history: Vec<Tick> = Vec::new();
    let mut next = 0;
    let step = config.sample_ms;
    let mut t = first.div_euclid(step) * step + if first.rem_euclid(step) == 0 { 0 } else { step };
    while t <= last {
        while next < messages.len() && messages[next].timestamp_ms <= t {
            let m = &messages[next];
            book.apply(m)?;
            if let Some(top) = book.top(m.timestamp_ms) {
                match history.last_mut() {
                    Some(prev) if prev.timestamp_ms == top.timestamp_ms => *prev = top,
                    Some(prev) if prev.best_bid == top.best_bid && prev.best_ask == top.best_ask => {}
                    _ => history.push(top),
                }
            }
            next += 1;
        }
        let mut row = Vec::with_capacity(table.columns.len());
        row.push(oid(&book, &config.q_grid).value);
        row.push(oiq(&book, &config.d_grid_bps).value);
        let windows: Vec<_> = config.deltas_flow_ms.iter().map(|&d| flow.window(t, d).ok()).collect();
        row.extend(windows.iter().map(|c| c.as_ref().and_then(tiq)));
        row.extend(windows.iter().map(|c| c.as_ref().and_then(tic)));
        row.extend(windows.iter().map(|c| c.as_ref().and_then(tio)));
        row.extend(config.deltas_pret_ms.iter().map(|&d| pret(&history, t, d)));
        table.timestamps.push(t);
        table.rows.push(row);
        t += step;
    }
    Ok(table)
}

/// Mid return from `t` to `t + h`, both ends read as the last tick at or
/// before; undefined when the stream ends before `t + h`.
pub fn forward_returns(ticks: &[Tick], t: i64, h: i64) -> Option<f64> {
    let end = ticks.last()?.timestamp_ms;
    if t + h > end {
        return None;
    }
    pret(ticks, t + h, h)
}

/// Regresses every feature column on forward returns at every horizon.
pub fn predict_eval(table: &FeatureTable, ticks: &[Tick], horizons_ms: &[i64]) -> Vec<RegressionReport> {
    let mut out = Vec::new();
    for (c, name) in table.columns.iter().enumerate() {
        for &h in horizons_ms {
            let mut acc = OlsAccumulator::default();
            let mut excluded = 0;
            for (t, row) in table.timestamps.iter().zip(&table.rows) {
                let y = last_at_or_before(ticks, *t).and(forward_returns(ticks, *t, h));
                match (row[c], y) {
                    (Some(x), Some(y)) if x.is_finite() && y.is_finite() => acc.push(x, y),
                    _ => excluded += 1,
                }
            }
            out.push(RegressionReport::from_accumulator(name, h, &acc, excluded));
        }
    }
    out
}

/// Observation alpha block read from a precomputed feature table, using the
/// latest row at or before the decision time. Return columns are scaled to
/// basis points.
pub struct TableAlpha {
    table: FeatureTable,
    cols: Vec<usize>,
}

impl TableAlpha {
    pub const DEFAULT_COLUMNS: [&'static str; 7] = ["oid", "oiq", "tiq_200", "tic_200", "tio_200", "pret_200", "pret_1000"];

    pub fn new(table: FeatureTable, columns: &[&str]) -> Result<Self, FeatureTableError> {
        let cols = columns
            .iter()
            .map(|c| table.column(c).ok_or_else(|| FeatureTableError::Format(format!("missing column {c}"))))
            .collect::<Result<_, _>>()?;
        Ok(TableAlpha { table, cols })
    }
}

impl AlphaSource for TableAlpha {
    fn names(&self) -> Vec<String> {
        self.cols.iter().map(|&c| self.table.columns[c].clone()).collect()
    }

    fn values(&mut self, view: &DecisionView<'_>) -> Vec<Option<f64>> {
        let Some(r) = self.table.row_at_or_before(view.tick.timestamp_ms) else {
            return vec![None; self.cols.len()];
        };
        self.cols
            .iter()
            .map(|&c| {
                let scale = if self.table.columns[c].starts_with("pret") { 1e4 } else { 1.0 };
                self.table.rows[r][c].map(|v| v * scale)
            })
            .collect()
    }
}
