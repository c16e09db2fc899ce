//! Decoding of Coinbase-style `full` channel messages and level-3 book snapshots.

use super::{BookSnapshot, DoneReason, FeedError, Level3Message, MsgType, SnapshotOrder};
use crate::types::Side;
use serde_json::Value;

fn side_of(v: &Value) -> Option<Side> {
    match v.as_str()? {
        "buy" | "bid" => Some(Side::Bid),
        "sell" | "ask" => Some(Side::Ask),
        _ => None,
    }
}

fn num(v: Option<&Value>) -> Option<f64> {
    match v? {
        Value::String(s) => s.parse().ok(),
        Value::Number(n) => n.as_f64(),
        _ => None,
    }
}

fn exchange_time(v: Option<&Value>) -> Option<i64> {
    let s = v?.as_str()?;
    chrono::DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|t| t.timestamp_millis())
}

/// Decodes one feed frame. Frames that do not describe a book event
/// (subscriptions, heartbeats, `change`, `activate`) yield `Ok(None)`.
pub(crate) fn decode_frame(text: &str, arrival_ms: i64) -> Result<Option<Level3Message>, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let kind = v.get("type").and_then(Value::as_str).unwrap_or("");
    let msg_type = match kind {
        "received" => MsgType::Received,
        "open" => MsgType::Open,
        "done" => MsgType::Done,
        "match" => MsgType::Match,
        _ => return Ok(None),
    };
    let sequence = v
        .get("sequence")
        .and_then(Value::as_u64)
        .ok_or_else(|| format!("{kind} frame without sequence"))?;
    let side = v
        .get("side")
        .and_then(side_of)
        .ok_or_else(|| format!("{kind} frame {sequence} without side"))?;
    let order_field = if msg_type == MsgType::Match {
        "maker_order_id"
    } else {
        "order_id"
    };
    let order_id = v
        .get(order_field)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("{kind} frame {sequence} without {order_field}"))?
        .to_string();
    let price = num(v.get("price")).unwrap_or(0.0);
    let size = match msg_type {
        MsgType::Open | MsgType::Done => num(v.get("remaining_size")).unwrap_or(0.0),
        _ => num(v.get("size")).unwrap_or(0.0),
    };
    let reason = if msg_type == MsgType::Done {
        match v.get("reason").and_then(Value::as_str) {
            Some("filled") => Some(DoneReason::Filled),
            Some(_) => Some(DoneReason::Canceled),
            None => return Err(format!("done frame {sequence} without reason")),
        }
    } else {
        None
    };
    Ok(Some(Level3Message {
        sequence,
        timestamp_ms: arrival_ms,
        msg_type,
        order_id,
        side,
        price,
        size,
        reason,
        exchange_ts_ms: exchange_time(v.get("time")),
    }))
}

/// Parses either the native snapshot schema or the exchange's
/// `{"sequence", "bids": [[price, size, order_id]], "asks": ...}` form.
pub(crate) fn decode_snapshot(text: &str) -> Result<BookSnapshot, FeedError> {
    if let Ok(native) = serde_json::from_str::<BookSnapshot>(text) {
        return Ok(native);
    }
    let v: Value = serde_json::from_str(text).map_err(|e| FeedError::Snapshot(e.to_string()))?;
    let sequence = v
        .get("sequence")
        .and_then(Value::as_u64)
        .ok_or_else(|| FeedError::Snapshot("missing sequence".into()))?;
    let side = |key: &str| -> Result<Vec<SnapshotOrder>, FeedError> {
        let rows = v
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| FeedError::Snapshot(format!("missing {key}")))?;
        rows.iter()
            .map(|row| {
                let arr = row
                    .as_array()
                    .filter(|a| a.len() >= 3)
                    .ok_or_else(|| FeedError::Snapshot(format!("bad {key} row {row}")))?;
                Ok(SnapshotOrder {
                    price: num(arr.first())
                        .ok_or_else(|| FeedError::Snapshot(format!("bad price in {row}")))?,
                    size: num(arr.get(1))
                        .ok_or_else(|| FeedError::Snapshot(format!("bad size in {row}")))?,
                    order_id: arr[2]
                        .as_str()
                        .ok_or_else(|| FeedError::Snapshot(format!("bad order id in {row}")))?
                        .to_string(),
                })
            })
            .collect()
    };
    Ok(BookSnapshot {
        sequence,
        bids: side("bids")?,
        asks: side("asks")?,
    })
}
