//! Reference faultless protocols.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::config::lg;
use crate::error::{Error, Result};
use crate::model::{NodeAction, Payload};
use crate::network::{hard_left_node, Layout, Network};
use crate::protocol::{random_payload, FaultlessRun, PrivateInput, Protocol, RoundRole, SharedProtocol};
use crate::rng::CounterRng;
use crate::transcript::ReceiveEvent;
use crate::NodeId;

mod decay;
mod repetition;
mod schedule;

pub use decay::{decay_round, DecayFlood};
pub use repetition::simulate_by_repetition;
pub use schedule::{
    derive_static_schedule, read_schedules_jsonl, write_schedules_jsonl, ScheduleCursor, StaticProtocol,
    StaticSchedule,
};

/// Payload width used by the reference protocols.
pub const MESSAGE_BYTES: usize = 8;

/// 64-bit FNV-1a.
fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A message that depends on the sender's input and everything it has heard,
/// so any mistake in a simulated history propagates into later payloads.
fn digest(node: NodeId, round: usize, input: &PrivateInput, history: &[ReceiveEvent]) -> Payload {
    let mut h = fnv1a((node as u64).to_le_bytes(), 0xcbf2_9ce4_8422_2325);
    h = fnv1a((round as u64).to_le_bytes(), h);
    for p in &input.payloads {
        h = fnv1a(p.as_bytes().iter().copied(), h);
    }
    for e in history {
        h = fnv1a((e.round as u64).to_le_bytes(), h);
        h = fnv1a(e.payload.as_bytes().iter().copied(), h);
    }
    Payload::new(h.to_le_bytes())
}

/// A single source broadcasting its `t`-th payload in round `t`.
#[derive(Clone, Debug)]
pub struct SourceFlood {
    source: NodeId,
    length: usize,
}

impl SourceFlood {
    pub fn new(source: NodeId, length: usize) -> Self {
        Self { source, length }
    }

    pub fn source(&self) -> NodeId {
        self.source
    }
}

impl Protocol for SourceFlood {
    fn name(&self) -> String {
        format!("flood:{}", self.length)
    }

    fn length(&self) -> usize {
        self.length
    }

    fn action(&self, node: NodeId, round: usize, input: &PrivateInput, _: &[ReceiveEvent]) -> Result<NodeAction, String> {
        if node != self.source {
            return Ok(NodeAction::Listen);
        }
        input
            .payloads
            .get(round - 1)
            .cloned()
            .map(NodeAction::Broadcast)
            .ok_or_else(|| format!("source holds {} payloads, round {round} needs one more", input.payloads.len()))
    }

    fn inputs(&self, network: &Network, seed: u64) -> Vec<PrivateInput> {
        let rng = CounterRng::new(seed);
        network
            .nodes()
            .map(|v| {
                if v == self.source {
                    PrivateInput::new(
                        (0..self.length)
                            .map(|i| random_payload(&rng, v, i as u64, MESSAGE_BYTES))
                            .collect(),
                    )
                } else {
                    PrivateInput::default()
                }
            })
            .collect()
    }
}

/// The star protocol that broadcasts `M_i` from the center in round `i`.
pub fn star_flood_protocol(network: &Network, length: usize) -> Result<SourceFlood> {
    let center = network
        .star_center()
        .ok_or_else(|| Error::Mismatch("star_flood needs a star network".into()))?;
    Ok(SourceFlood::new(center, length))
}

/// Everyone listens in every round.
#[derive(Clone, Copy, Debug)]
pub struct Silent {
    length: usize,
}

impl Silent {
    pub fn new(length: usize) -> Self {
        Self { length }
    }
}

impl Protocol for Silent {
    fn name(&self) -> String {
        format!("silent:{}", self.length)
    }

    fn length(&self) -> usize {
        self.length
    }

    fn action(&self, _: NodeId, _: usize, _: &PrivateInput, _: &[ReceiveEvent]) -> Result<NodeAction, String> {
        Ok(NodeAction::Listen)
    }
}

/// Time-division schedule: node `v` broadcasts in round `t` iff
/// `slot[v] == (t - 1) % period`. Broadcasts carry a digest of the sender's
/// input and history.
#[derive(Clone, Debug)]
pub struct RoundRobin {
    slot: Vec<Option<usize>>,
    period: usize,
    length: usize,
}

impl RoundRobin {
    pub fn new(slot: Vec<Option<usize>>, period: usize, length: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::param("round-robin period must be positive"));
        }
        if let Some(s) = slot.iter().flatten().find(|&&s| s >= period) {
            return Err(Error::param(format!("slot {s} outside period {period}")));
        }
        Ok(Self { slot, period, length })
    }

    /// Collision-free schedule from a greedy distance-2 coloring in id order.
    pub fn greedy(network: &Network, length: usize) -> Result<Self> {
        let n = network.len();
        let mut color: Vec<Option<usize>> = vec![None; n];
        let mut period = 1;
        for v in network.nodes() {
            let mut used = vec![false; network.delta() * network.delta() + 2];
            for w in network.ball(v, 2) {
                if let Some(c) = color[w] {
                    if c >= used.len() {
                        used.resize(c + 1, false);
                    }
                    used[c] = true;
                }
            }
            let c = used.iter().position(|&u| !u).unwrap_or(used.len());
            color[v] = Some(c);
            period = period.max(c + 1);
        }
        Self::new(color, period, length)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn slot(&self, v: NodeId) -> Option<usize> {
        self.slot[v]
    }
}

impl Protocol for RoundRobin {
    fn name(&self) -> String {
        format!("round-robin:{}", self.length)
    }

    fn length(&self) -> usize {
        self.length
    }

    fn action(&self, node: NodeId, round: usize, input: &PrivateInput, history: &[ReceiveEvent]) -> Result<NodeAction, String> {
        if self.slot.get(node).copied().flatten() == Some((round - 1) % self.period) {
            Ok(NodeAction::Broadcast(digest(node, round, input, history)))
        } else {
            Ok(NodeAction::Listen)
        }
    }
}

/// Round-robin over the designated left nodes of a bipartite generator.
///
/// On `bipartite_hard` the nodes `l_t^1..l_t^Δ` broadcast in round `t`; on
/// `directed_bipartite` sender `l_t` broadcasts in round `t`. Rounds repeat
/// with period `Δ`. The faultless run is checked for collisions.
pub fn bipartite_round_robin_protocol(network: &Network, length: usize) -> Result<RoundRobin> {
    let mut slot = vec![None; network.len()];
    let period = match network.layout() {
        Some(&Layout::Bipartite { side, groups }) => {
            for t in 0..groups {
                for i in 0..groups {
                    slot[hard_left_node(side, groups, i, t)] = Some(t);
                }
            }
            groups
        }
        Some(&Layout::DirectedBipartite { delta }) => {
            for (l, s) in slot.iter_mut().enumerate().take(delta) {
                *s = Some(l);
            }
            delta
        }
        None => return Err(Error::Mismatch("bipartite round-robin needs a bipartite generator layout".into())),
    };
    let rr = RoundRobin::new(slot, period, length)?;
    check_collision_free(network, &rr)?;
    Ok(rr)
}

/// Fails if some listener has two broadcasting in-neighbors in the faultless run.
pub fn check_collision_free(network: &Network, protocol: &dyn Protocol) -> Result<()> {
    let inputs = protocol.inputs(network, 0);
    let run = FaultlessRun::new(network, protocol, &inputs)?;
    for t in 1..=protocol.length() {
        let actions = &run.transcript.round(t).actions;
        for v in network.nodes() {
            if matches!(run.role(v, t), RoundRole::Listen { sender: None })
                && network.in_neighbors(v).iter().filter(|&&u| actions[u].is_broadcast()).count() > 1
            {
                return Err(Error::Mismatch(format!("collision at node {v} in round {t}")));
            }
        }
    }
    Ok(())
}

/// Round-robin appropriate for the graph: the generator's own rounds on the
/// bipartite families, a distance-2 coloring elsewhere.
pub fn round_robin_protocol(network: &Network, length: usize) -> Result<RoundRobin> {
    match network.layout() {
        Some(_) => bipartite_round_robin_protocol(network, length),
        None => RoundRobin::greedy(network, length),
    }
}

/// Textual protocol selector as used on the command line: `flood:T`,
/// `silent:T`, `round-robin:T` (or `rr:T`), `decay:T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolSpec {
    Flood(usize),
    Silent(usize),
    RoundRobin(usize),
    Decay(usize),
}

impl ProtocolSpec {
    pub fn length(&self) -> usize {
        match *self {
            ProtocolSpec::Flood(t) | ProtocolSpec::Silent(t) | ProtocolSpec::RoundRobin(t) | ProtocolSpec::Decay(t) => t,
        }
    }

    pub fn with_length(self, t: usize) -> Self {
        match self {
            ProtocolSpec::Flood(_) => ProtocolSpec::Flood(t),
            ProtocolSpec::Silent(_) => ProtocolSpec::Silent(t),
            ProtocolSpec::RoundRobin(_) => ProtocolSpec::RoundRobin(t),
            ProtocolSpec::Decay(_) => ProtocolSpec::Decay(t),
        }
    }

    /// Instantiates the protocol on `network`. Flood uses the star center
    /// when there is one and node 0 otherwise; `seed` feeds public coins.
    pub fn build(&self, network: &Network, seed: u64) -> Result<SharedProtocol> {
        Ok(match *self {
            ProtocolSpec::Flood(t) => match network.star_center() {
                Some(c) => Arc::new(SourceFlood::new(c, t)),
                None => Arc::new(SourceFlood::new(0, t)),
            },
            ProtocolSpec::Silent(t) => Arc::new(Silent::new(t)),
            ProtocolSpec::RoundRobin(t) => Arc::new(round_robin_protocol(network, t)?),
            ProtocolSpec::Decay(t) => Arc::new(DecayFlood::new(0, lg(network.delta()), t, seed)),
        })
    }
}

impl fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolSpec::Flood(t) => write!(f, "flood:{t}"),
            ProtocolSpec::Silent(t) => write!(f, "silent:{t}"),
            ProtocolSpec::RoundRobin(t) => write!(f, "round-robin:{t}"),
            ProtocolSpec::Decay(t) => write!(f, "decay:{t}"),
        }
    }
}

impl FromStr for ProtocolSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("protocol spec {s:?} needs the form name:T")))?;
        let t: usize = arg
            .parse()
            .map_err(|_| Error::config(format!("protocol length {arg:?} is not an integer")))?;
        if t == 0 {
            return Err(Error::config("protocol length must be at least 1"));
        }
        match name {
            "flood" => Ok(ProtocolSpec::Flood(t)),
            "silent" => Ok(ProtocolSpec::Silent(t)),
            "round-robin" | "rr" => Ok(ProtocolSpec::RoundRobin(t)),
            "decay" => Ok(ProtocolSpec::Decay(t)),
            other => Err(Error::config(format!("unknown protocol {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bipartite_hard, cycle, directed_bipartite, path, star};

    #[test]
    fn star_flood_delivers_in_order() {
        let s = star(4).unwrap();
        let p = star_flood_protocol(&s, 3).unwrap();
        let inputs = p.inputs(&s, 7);
        let run = FaultlessRun::new(&s, &p, &inputs).unwrap();
        for leaf in 1..=4 {
            let h = &run.histories()[leaf];
            assert_eq!(h.rounds(), vec![1, 2, 3]);
            for (i, e) in h.events().iter().enumerate() {
                assert_eq!(e.payload, inputs[0].payloads[i]);
            }
        }
        assert!(run.histories()[0].is_empty());
    }

    #[test]
    fn star_flood_rejects_other_graphs() {
        assert!(matches!(star_flood_protocol(&path(4).unwrap(), 2), Err(Error::Mismatch(_))));
        assert!(star_flood_protocol(&path(2).unwrap(), 2).is_ok());
    }

    #[test]
    fn tiny_star_single_round() {
        let s = star(2).unwrap();
        let p = star_flood_protocol(&s, 1).unwrap();
        let run = FaultlessRun::new(&s, &p, &p.inputs(&s, 0)).unwrap();
        assert_eq!(run.histories()[1].rounds(), vec![1]);
        assert_eq!(run.histories()[2].rounds(), vec![1]);
    }

    #[test]
    fn greedy_round_robin_is_collision_free() {
        for net in [cycle(16).unwrap(), path(9).unwrap(), crate::network::random_bounded(32, 4, 3).unwrap()] {
            let rr = RoundRobin::greedy(&net, 40).unwrap();
            check_collision_free(&net, &rr).unwrap();
            let run = FaultlessRun::new(&net, &rr, &rr.inputs(&net, 1)).unwrap();
            // Over one period every node hears each neighbor exactly once.
            for v in net.nodes() {
                let heard = run.histories()[v].before(rr.period() + 1).len();
                assert_eq!(heard, net.neighbors(v).len(), "node {v}");
            }
        }
    }

    #[test]
    fn directed_bipartite_round_robin() {
        let d = directed_bipartite(4).unwrap();
        let rr = bipartite_round_robin_protocol(&d, 4).unwrap();
        let run = FaultlessRun::new(&d, &rr, &rr.inputs(&d, 0)).unwrap();
        for r in 4..8 {
            assert_eq!(run.histories()[r].rounds(), vec![1, 2, 3, 4]);
        }
        for l in 0..4 {
            assert!(run.histories()[l].is_empty());
        }
    }

    #[test]
    fn hard_instance_round_robin() {
        for seed in 0..10 {
            let g = bipartite_hard(9, 3, seed).unwrap();
            let rr = bipartite_round_robin_protocol(&g, 3).unwrap();
            let run = FaultlessRun::new(&g, &rr, &rr.inputs(&g, seed)).unwrap();
            for r in 9..18 {
                assert_eq!(run.histories()[r].rounds(), vec![1, 2, 3], "seed {seed}, node {r}");
            }
        }
    }

    #[test]
    fn mismatch_is_reported() {
        // Two broadcasters sharing a listener in every round.
        let p = path(3).unwrap();
        let rr = RoundRobin::new(vec![Some(0), None, Some(0)], 1, 2).unwrap();
        assert!(matches!(check_collision_free(&p, &rr), Err(Error::Mismatch(_))));
        assert!(bipartite_round_robin_protocol(&p, 2).is_err());
    }

    #[test]
    fn spec_strings() {
        for s in ["flood:8", "silent:4", "round-robin:64", "decay:16"] {
            assert_eq!(s.parse::<ProtocolSpec>().unwrap().to_string(), s);
        }
        assert_eq!("rr:3".parse::<ProtocolSpec>().unwrap(), ProtocolSpec::RoundRobin(3));
        assert!("flood".parse::<ProtocolSpec>().is_err());
        assert!("flood:0".parse::<ProtocolSpec>().is_err());
        assert!("gossip:3".parse::<ProtocolSpec>().is_err());
    }

    #[test]
    fn digest_depends_on_history() {
        let input = PrivateInput::default();
        let e = ReceiveEvent { round: 1, payload: Payload::new(vec![1]) };
        let f = ReceiveEvent { round: 1, payload: Payload::new(vec![2]) };
        assert_ne!(digest(0, 2, &input, &[e]), digest(0, 2, &input, &[f]));
    }
}
