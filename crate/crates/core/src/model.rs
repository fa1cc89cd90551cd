//! The (noisy) radio network round semantics.
//!
//! A listening node receives a message in a round iff exactly one of its
//! in-neighbors broadcasts and no receiver fault hits it. Collisions, silence
//! and faults all look the same to the listener.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::{CounterRng, Stream};
use crate::NodeId;

/// Default payload cap in bytes.
pub const DEFAULT_PAYLOAD_CAP: usize = 64;

/// An opaque message body of a simulated protocol.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Payload(Vec<u8>);

impl Payload {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Self(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        hex::decode(s)
            .map(Self)
            .map_err(|e| Error::config(format!("invalid hex payload {s:?}: {e}")))
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payload({})", self.to_hex())
    }
}

impl Serialize for Payload {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Payload {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map(Payload).map_err(serde::de::Error::custom)
    }
}

/// What a node does in one round. `M` is the message type on the air; the
/// simulated protocols use [`Payload`], the simulators use their own framing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeAction<M = Payload> {
    Listen,
    Broadcast(M),
}

impl<M> NodeAction<M> {
    pub fn is_broadcast(&self) -> bool {
        matches!(self, NodeAction::Broadcast(_))
    }

    pub fn message(&self) -> Option<&M> {
        match self {
            NodeAction::Broadcast(m) => Some(m),
            NodeAction::Listen => None,
        }
    }
}

/// Independent receiver faults with probability `p` per (node, round).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    p: f64,
    seed: u64,
    rng: CounterRng,
}

impl NoiseModel {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param(format!("fault probability must lie in [0, 1), got {p}")));
        }
        Ok(Self {
            p,
            seed,
            rng: CounterRng::new(seed),
        })
    }

    /// The classic (faultless) model.
    pub fn faultless() -> Self {
        Self::new(0.0, 0).expect("p = 0 is valid")
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator shared by the simulators for their own coins.
    pub fn rng(&self) -> &CounterRng {
        &self.rng
    }

    #[inline]
    pub fn faulted(&self, node: NodeId, round: u64) -> bool {
        self.p > 0.0 && self.rng.bernoulli(self.p, Stream::Fault, node, round)
    }

    pub fn fault_vector(&self, n: usize, round: u64) -> Vec<bool> {
        (0..n).map(|v| self.faulted(v, round)).collect()
    }
}

/// One round of the model, computed directly from the definition.
///
/// `received[v]` is `Some(m)` iff `v` listens, exactly one in-neighbor
/// broadcasts `m`, and `faults[v]` is false.
pub fn step<M: Clone>(network: &Network, actions: &[NodeAction<M>], faults: &[bool]) -> Result<Vec<Option<M>>> {
    if actions.len() != network.len() || faults.len() != network.len() {
        return Err(Error::config(format!(
            "step needs one action and one fault flag per node: n = {}, actions = {}, faults = {}",
            network.len(),
            actions.len(),
            faults.len()
        )));
    }
    Ok(network
        .nodes()
        .map(|v| {
            if actions[v].is_broadcast() || faults[v] {
                return None;
            }
            let mut senders = network.in_neighbors(v).iter().filter_map(|&u| actions[u].message());
            match (senders.next(), senders.next()) {
                (Some(m), None) => Some(m.clone()),
                _ => None,
            }
        })
        .collect())
}

/// Sparse delivery engine used by the simulators.
///
/// Work per round is proportional to the out-degree of the broadcasters, and
/// fault coins are only drawn for nodes that would otherwise receive; since
/// the draws are counter-based this is observationally identical to drawing
/// the full fault vector.
#[derive(Clone, Debug)]
pub struct Radio {
    hits: Vec<u32>,
    sender: Vec<NodeId>,
    touched: Vec<NodeId>,
}

impl Radio {
    pub fn new(n: usize) -> Self {
        Self {
            hits: vec![0; n],
            sender: vec![0; n],
            touched: Vec::new(),
        }
    }

    /// Runs one physical round. `broadcasters` must not contain duplicates.
    /// `on_receive(receiver, sender)` fires for every successful reception;
    /// listeners are all nodes for which `listening` returns true.
    pub fn deliver(
        &mut self,
        network: &Network,
        noise: &NoiseModel,
        round: u64,
        broadcasters: &[NodeId],
        listening: impl Fn(NodeId) -> bool,
        mut on_receive: impl FnMut(NodeId, NodeId),
    ) {
        for &b in broadcasters {
            for &w in network.out_neighbors(b) {
                if self.hits[w] == 0 {
                    self.touched.push(w);
                }
                self.hits[w] += 1;
                self.sender[w] = b;
            }
        }
        for &w in &self.touched {
            if self.hits[w] == 1 && listening(w) && !noise.faulted(w, round) {
                on_receive(w, self.sender[w]);
            }
            self.hits[w] = 0;
        }
        self.touched.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{path, star};

    fn m(s: &str) -> Payload {
        Payload::new(s.as_bytes())
    }

    #[test]
    fn single_broadcaster_reaches_all_listeners() {
        let s = star(2).unwrap();
        let actions = vec![NodeAction::Broadcast(m("m")), NodeAction::Listen, NodeAction::Listen];
        let got = step(&s, &actions, &[false; 3]).unwrap();
        assert_eq!(got, vec![None, Some(m("m")), Some(m("m"))]);
    }

    #[test]
    fn collision_is_silence() {
        let p = path(3).unwrap();
        let actions = vec![NodeAction::Broadcast(m("a")), NodeAction::Listen, NodeAction::Broadcast(m("c"))];
        let got = step(&p, &actions, &[false; 3]).unwrap();
        assert_eq!(got, vec![None, None, None]);
    }

    #[test]
    fn fault_drops_message() {
        let e = path(2).unwrap();
        let actions = vec![NodeAction::Broadcast(m("m")), NodeAction::Listen];
        assert_eq!(step(&e, &actions, &[false, true]).unwrap(), vec![None, None]);
    }

    #[test]
    fn mismatched_lengths_are_config_errors() {
        let e = path(2).unwrap();
        let err = step::<Payload>(&e, &[NodeAction::Listen], &[false, false]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn noise_rejects_out_of_range_p() {
        assert!(NoiseModel::new(1.0, 0).is_err());
        assert!(NoiseModel::new(-0.1, 0).is_err());
        let z = NoiseModel::new(0.0, 5).unwrap();
        assert!((0..1000).all(|r| !z.faulted(0, r)));
    }

    #[test]
    fn radio_agrees_with_step() {
        let net = crate::network::random_bounded(20, 4, 3).unwrap();
        let noise = NoiseModel::new(0.4, 77).unwrap();
        let coins = CounterRng::new(5);
        let mut radio = Radio::new(net.len());
        for round in 1..200u64 {
            let actions: Vec<NodeAction<NodeId>> = net
                .nodes()
                .map(|v| {
                    if coins.bernoulli(0.3, Stream::Protocol, v, round) {
                        NodeAction::Broadcast(v)
                    } else {
                        NodeAction::Listen
                    }
                })
                .collect();
            let faults = noise.fault_vector(net.len(), round);
            let expected = step(&net, &actions, &faults).unwrap();
            let bcast: Vec<NodeId> = net.nodes().filter(|&v| actions[v].is_broadcast()).collect();
            let mut got = vec![None; net.len()];
            radio.deliver(&net, &noise, round, &bcast, |v| !actions[v].is_broadcast(), |w, s| got[w] = Some(s));
            assert_eq!(got, expected, "round {round}");
        }
    }
}
