use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CommandRecord, GestureEvent};
use crate::dataset::GestureKind;

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    index: usize,
    kind: GestureKind,
    class: u32,
    score: f64,
    completion: f64,
    provisional: u8,
}

pub fn write_events_csv<W: Write>(events: &[GestureEvent], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for e in events {
        out.serialize(EventRow {
            index: e.index,
            kind: e.kind,
            class: e.class_id,
            score: e.score,
            completion: e.completion,
            provisional: e.provisional as u8,
        })?;
    }
    if events.is_empty() {
        out.write_record(["index", "kind", "class", "score", "completion", "provisional"])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an events CSV back. The segment start is not stored and comes back
/// as the event index.
pub fn read_events_csv<R: Read>(r: R) -> csv::Result<Vec<GestureEvent>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<EventRow>()
        .map(|row| {
            row.map(|r| GestureEvent {
                index: r.index,
                kind: r.kind,
                class_id: r.class,
                score: r.score,
                completion: r.completion,
                provisional: r.provisional != 0,
                segment_start: r.index,
            })
        })
        .collect()
}

pub fn write_commands_csv<W: Write>(records: &[CommandRecord], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "command", "latency_ms"])?;
    for r in records {
        out.write_record([r.index.to_string(), r.command.to_string(), format!("{:.3}", r.latency_ms)])?;
    }
    out.flush()?;
    Ok(())
}
