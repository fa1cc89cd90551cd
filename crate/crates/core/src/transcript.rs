//! Receive histories, execution transcripts and the simulation predicate.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeAction, Payload};
use crate::protocol::PrivateInput;
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceiveEvent {
    pub round: usize,
    pub payload: Payload,
}

/// A node's receive history, stored sparsely and sorted by round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    events: Vec<ReceiveEvent>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(mut events: Vec<ReceiveEvent>) -> Self {
        events.sort_by_key(|e| e.round);
        Self { events }
    }

    pub fn events(&self) -> &[ReceiveEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events from rounds strictly before `round`: what a protocol may read
    /// when choosing its action for `round`.
    pub fn before(&self, round: usize) -> &[ReceiveEvent] {
        let cut = self.events.partition_point(|e| e.round < round);
        &self.events[..cut]
    }

    /// Records a reception, keeping the rounds sorted. A second event for the
    /// same round replaces the first.
    pub fn record(&mut self, round: usize, payload: Payload) {
        match self.events.binary_search_by_key(&round, |e| e.round) {
            Ok(i) => self.events[i].payload = payload,
            Err(i) => self.events.insert(i, ReceiveEvent { round, payload }),
        }
    }

    pub fn rounds(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.round).collect()
    }
}

/// Actions and faults of one round. Faults are kept for debugging only; no
/// protocol logic ever sees them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundLog {
    pub actions: Vec<NodeAction>,
    pub faults: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub inputs: Vec<PrivateInput>,
    pub histories: Vec<History>,
    pub rounds: Vec<RoundLog>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Action log of round `round` (1-based).
    pub fn round(&self, round: usize) -> &RoundLog {
        &self.rounds[round - 1]
    }

    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<()> {
        write_histories_jsonl(&self.histories, w)
    }
}

/// Per-node verdict of the simulation predicate: `true` iff the claimed
/// history equals the faultless one exactly (rounds and payloads).
pub fn verify_simulation(original: &Transcript, reconstruction: &[History]) -> Vec<bool> {
    original
        .histories
        .iter()
        .enumerate()
        .map(|(v, h)| reconstruction.get(v).is_some_and(|r| r == h))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    node: NodeId,
    round: usize,
    payload: String,
}

/// JSON-lines dump, one `{"node","round","payload"}` record per receive event.
pub fn write_histories_jsonl<W: Write>(histories: &[History], mut w: W) -> Result<()> {
    for (node, h) in histories.iter().enumerate() {
        for e in h.events() {
            let rec = EventRecord {
                node,
                round: e.round,
                payload: e.payload.to_hex(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_histories_jsonl<R: BufRead>(r: R, n: usize) -> Result<Vec<History>> {
    let mut events: Vec<Vec<ReceiveEvent>> = vec![Vec::new(); n];
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)?;
        if rec.node >= n {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("node {} out of range", rec.node),
            });
        }
        events[rec.node].push(ReceiveEvent {
            round: rec.round,
            payload: Payload::from_hex(&rec.payload)?,
        });
    }
    Ok(events.into_iter().map(History::from_events).collect())
}
