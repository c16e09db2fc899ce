//! Where recorded messages and snapshots come from.

use super::coinbase::{decode_frame, decode_snapshot};
use super::{decode_line, BookSnapshot, FeedError, Level3Message};
use std::collections::VecDeque;
use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

pub(crate) fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// Result of one poll of a feed.
#[derive(Debug)]
pub enum FeedPoll {
    Message(Level3Message),
    /// Nothing arrived within the timeout.
    Idle,
    /// The source has no more data.
    Closed,
}

pub trait FeedSource: Send {
    fn poll(&mut self, timeout: Duration) -> Result<FeedPoll, FeedError>;
}

pub trait SnapshotSource {
    fn fetch(&mut self) -> Result<BookSnapshot, FeedError>;
}

/// Replays a native message log as if it were a live feed. Timestamps are
/// kept as stored so a record/replay round trip is lossless.
pub struct FileFeed {
    lines: std::io::Lines<BufReader<std::fs::File>>,
    line_no: usize,
}

impl FileFeed {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, FeedError> {
        let path = path.into();
        let file = std::fs::File::open(&path).map_err(|e| FeedError::io(&path, e))?;
        Ok(FileFeed {
            lines: BufReader::new(file).lines(),
            line_no: 0,
        })
    }
}

impl FeedSource for FileFeed {
    fn poll(&mut self, _timeout: Duration) -> Result<FeedPoll, FeedError> {
        loop {
            match self.lines.next() {
                None => return Ok(FeedPoll::Closed),
                Some(Err(e)) => {
                    return Err(FeedError::Connection {
                        reason: e.to_string(),
                        summary: None,
                    })
                }
                Some(Ok(line)) => {
                    self.line_no += 1;
                    if line.trim().is_empty() {
                        continue;
                    }
                    return decode_line(&line, self.line_no).map(FeedPoll::Message);
                }
            }
        }
    }
}

/// In-memory feed, optionally failing after a number of messages.
/// Used for fixtures and fault injection.
pub struct ScriptedFeed {
    queue: VecDeque<Level3Message>,
    fail_after: Option<usize>,
    delivered: usize,
}

impl ScriptedFeed {
    pub fn new(messages: Vec<Level3Message>) -> Self {
        ScriptedFeed {
            queue: messages.into(),
            fail_after: None,
            delivered: 0,
        }
    }

    pub fn fail_after(mut self, n: usize) -> Self {
        self.fail_after = Some(n);
        self
    }
}

impl FeedSource for ScriptedFeed {
    fn poll(&mut self, _timeout: Duration) -> Result<FeedPoll, FeedError> {
        if self.fail_after == Some(self.delivered) {
            return Err(FeedError::Connection {
                reason: "scripted disconnect".into(),
                summary: None,
            });
        }
        match self.queue.pop_front() {
            Some(m) => {
                self.delivered += 1;
                Ok(FeedPoll::Message(m))
            }
            None => Ok(FeedPoll::Closed),
        }
    }
}

/// Live level-3 feed over a websocket. Arrival time is stamped locally.
pub struct WebSocketFeed {
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
}

impl WebSocketFeed {
    pub fn connect(url: &str, product_id: &str) -> Result<Self, FeedError> {
        let conn_err = |e: tungstenite::Error| FeedError::Connection {
            reason: e.to_string(),
            summary: None,
        };
        let (mut socket, _) = tungstenite::connect(url).map_err(conn_err)?;
        let subscribe = serde_json::json!({
            "type": "subscribe",
            "product_ids": [product_id],
            "channels": ["full"],
        });
        socket
            .send(Message::text(subscribe.to_string()))
            .map_err(conn_err)?;
        Ok(WebSocketFeed { socket })
    }

    fn set_timeout(&mut self, timeout: Duration) {
        let t = Some(timeout.max(Duration::from_millis(1)));
        let _ = match self.socket.get_mut() {
            MaybeTlsStream::Plain(s) => s.set_read_timeout(t),
            MaybeTlsStream::Rustls(s) => s.sock.set_read_timeout(t),
            _ => Ok(()),
        };
    }
}

impl FeedSource for WebSocketFeed {
    fn poll(&mut self, timeout: Duration) -> Result<FeedPoll, FeedError> {
        self.set_timeout(timeout);
        loop {
            match self.socket.read() {
                Ok(Message::Text(text)) => {
                    match decode_frame(text.as_str(), now_ms()) {
                        Ok(Some(m)) => return Ok(FeedPoll::Message(m)),
                        Ok(None) => continue,
                        Err(reason) => {
                            log::warn!("skipping undecodable frame: {reason}");
                            continue;
                        }
                    }
                }
                Ok(Message::Close(_)) => return Ok(FeedPoll::Closed),
                Ok(_) => continue,
                Err(tungstenite::Error::Io(e))
                    if matches!(
                        e.kind(),
                        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                    ) =>
                {
                    return Ok(FeedPoll::Idle)
                }
                Err(tungstenite::Error::ConnectionClosed) => return Ok(FeedPoll::Closed),
                Err(e) => {
                    return Err(FeedError::Connection {
                        reason: e.to_string(),
                        summary: None,
                    })
                }
            }
        }
    }
}

pub struct FileSnapshot(pub PathBuf);

impl SnapshotSource for FileSnapshot {
    fn fetch(&mut self) -> Result<BookSnapshot, FeedError> {
        let text = std::fs::read_to_string(&self.0).map_err(|e| FeedError::io(&self.0, e))?;
        decode_snapshot(&text)
    }
}

pub struct StaticSnapshot(pub BookSnapshot);

impl SnapshotSource for StaticSnapshot {
    fn fetch(&mut self) -> Result<BookSnapshot, FeedError> {
        Ok(self.0.clone())
    }
}

/// REST level-3 book endpoint.
pub struct HttpSnapshot(pub String);

impl SnapshotSource for HttpSnapshot {
    fn fetch(&mut self) -> Result<BookSnapshot, FeedError> {
        let conn_err = |e: ureq::Error| FeedError::Connection {
            reason: e.to_string(),
            summary: None,
        };
        let body = ureq::get(self.0.as_str())
            .call()
            .map_err(conn_err)?
            .body_mut()
            .read_to_string()
            .map_err(conn_err)?;
        decode_snapshot(&body)
    }
}

fn local_path(url: &str) -> Option<PathBuf> {
    if let Some(rest) = url.strip_prefix("file://") {
        return Some(PathBuf::from(rest));
    }
    if url.contains("://") {
        None
    } else {
        Some(PathBuf::from(url))
    }
}

/// Opens a feed from a URL: `ws://`/`wss://` for a live feed, `file://` (or a
/// bare path) for a recorded fixture.
pub fn open_feed(url: &str, product_id: &str) -> Result<Box<dyn FeedSource>, FeedError> {
    if url.starts_with("ws://") || url.starts_with("wss://") {
        return Ok(Box::new(WebSocketFeed::connect(url, product_id)?));
    }
    match local_path(url) {
        Some(p) => Ok(Box::new(FileFeed::open(p)?)),
        None => Err(FeedError::UnsupportedEndpoint(url.to_string())),
    }
}

pub fn open_snapshot(url: &str) -> Result<Box<dyn SnapshotSource>, FeedError> {
    if url.starts_with("http://") || url.starts_with("https://") {
        return Ok(Box::new(HttpSnapshot(url.to_string())));
    }
    match local_path(url) {
        Some(p) => Ok(Box::new(FileSnapshot(p))),
        None => Err(FeedError::UnsupportedEndpoint(url.to_string())),
    }
}
