//! Live session recording: one reader thread, one log writer.

use super::sources::{FeedPoll, FeedSource, SnapshotSource};
use super::{encode_line, FeedError, Level3Message};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

/// Files making up one recording segment.
#[derive(Clone, Debug)]
pub struct SegmentPaths {
    pub dir: PathBuf,
    pub snapshot: PathBuf,
    pub log: PathBuf,
}

impl SegmentPaths {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        SegmentPaths {
            snapshot: dir.join("snapshot.json"),
            log: dir.join("messages.jsonl"),
            dir,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordingSummary {
    pub message_count: u64,
    pub first_sequence: Option<u64>,
    pub last_sequence: Option<u64>,
    pub gap_count: u64,
    pub snapshot_sequence: Option<u64>,
}

impl RecordingSummary {
    fn observe(&mut self, seq: u64) {
        if let Some(last) = self.last_sequence {
            if seq > last + 1 {
                self.gap_count += 1;
            }
        } else {
            self.first_sequence = Some(seq);
        }
        self.last_sequence = Some(seq);
        self.message_count += 1;
    }
}

/// Number of positions where the sequence jumps by more than one.
pub fn count_gaps(sequences: &[u64]) -> u64 {
    sequences
        .windows(2)
        .filter(|w| w[1] > w[0] && w[1] - w[0] > 1)
        .count() as u64
}

enum Event {
    Message(Level3Message),
    Failed(FeedError),
}

struct LogSink {
    path: PathBuf,
    writer: BufWriter<File>,
    since_flush: usize,
}

impl LogSink {
    const FLUSH_EVERY: usize = 256;

    fn create(path: &Path) -> Result<Self, FeedError> {
        let file = File::create(path).map_err(|e| FeedError::io(path, e))?;
        Ok(LogSink {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
            since_flush: 0,
        })
    }

    fn append(&mut self, msg: &Level3Message) -> Result<(), FeedError> {
        let line = encode_line(msg);
        if let Err(e) = writeln!(self.writer, "{line}") {
            let _ = self.writer.flush();
            return Err(FeedError::io(&self.path, e));
        }
        self.since_flush += 1;
        if self.since_flush >= Self::FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), FeedError> {
        self.since_flush = 0;
        self.writer.flush().map_err(|e| FeedError::io(&self.path, e))
    }
}

/// Records `duration` of feed traffic into `paths`.
///
/// The snapshot is requested once the first message is buffered, so the
/// stream covers everything after it; a snapshot older than the first
/// buffered sequence is rejected. Messages are written in arrival order.
pub fn record_session(
    feed: Box<dyn FeedSource>,
    snapshot: &mut dyn SnapshotSource,
    paths: &SegmentPaths,
    duration: Duration,
) -> Result<RecordingSummary, FeedError> {
    std::fs::create_dir_all(&paths.dir).map_err(|e| FeedError::io(&paths.dir, e))?;
    let mut sink = LogSink::create(&paths.log)?;

    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel::<Event>();
    let deadline = Instant::now() + duration;
    let reader = {
        let stop = Arc::clone(&stop);
        let mut feed = feed;
        std::thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                let now = Instant::now();
                if now >= deadline {
                    break;
                }
                let wait = (deadline - now).min(Duration::from_millis(200));
                match feed.poll(wait) {
                    Ok(FeedPoll::Message(m)) => {
                        if tx.send(Event::Message(m)).is_err() {
                            break;
                        }
                    }
                    Ok(FeedPoll::Idle) => {}
                    Ok(FeedPoll::Closed) => break,
                    Err(e) => {
                        let _ = tx.send(Event::Failed(e));
                        break;
                    }
                }
            }
        })
    };

    let result = write_events(rx, snapshot, paths, &mut sink);
    stop.store(true, Ordering::Relaxed);
    let _ = reader.join();
    result
}

fn write_events(
    rx: mpsc::Receiver<Event>,
    snapshot: &mut dyn SnapshotSource,
    paths: &SegmentPaths,
    sink: &mut LogSink,
) -> Result<RecordingSummary, FeedError> {
    let mut summary = RecordingSummary::default();
    let mut have_snapshot = false;
    for event in rx.iter() {
        match event {
            Event::Message(msg) => {
                if !have_snapshot {
                    let snap = snapshot.fetch()?;
                    if snap.sequence + 1 < msg.sequence {
                        return Err(FeedError::SnapshotOutOfRange {
                            snapshot: snap.sequence,
                            first_buffered: msg.sequence,
                        });
                    }
                    snap.write_file(&paths.snapshot)?;
                    summary.snapshot_sequence = Some(snap.sequence);
                    have_snapshot = true;
                }
                sink.append(&msg)?;
                summary.observe(msg.sequence);
            }
            Event::Failed(e) => {
                sink.flush()?;
                return Err(match e {
                    FeedError::Connection { reason, .. } => FeedError::Connection {
                        reason,
                        summary: Some(summary),
                    },
                    other => other,
                });
            }
        }
    }
    if !have_snapshot {
        let snap = snapshot.fetch()?;
        snap.write_file(&paths.snapshot)?;
        summary.snapshot_sequence = Some(snap.sequence);
    }
    sink.flush()?;
    Ok(summary)
}
