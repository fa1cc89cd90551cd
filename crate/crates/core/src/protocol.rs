//! The protocol interface and the round-based execution loop.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{step, NodeAction, NoiseModel, Payload, DEFAULT_PAYLOAD_CAP};
use crate::network::Network;
use crate::rng::{CounterRng, Stream};
use crate::transcript::{History, ReceiveEvent, RoundLog, Transcript};
use crate::NodeId;

/// A node's private input: an ordered list of payloads whose meaning is up to
/// the protocol.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrivateInput {
    pub payloads: Vec<Payload>,
}

impl PrivateInput {
    pub fn new(payloads: Vec<Payload>) -> Self {
        Self { payloads }
    }
}

/// A faultless radio protocol of fixed length.
///
/// `action(v, t, input, history)` decides what `v` does in round `t`
/// (1-based). The engine only ever passes the events of rounds `< t`, and a
/// simulator replaying an old round passes the corresponding prefix, so
/// implementations must not assume anything about later rounds.
pub trait Protocol: Send + Sync {
    fn name(&self) -> String;

    fn length(&self) -> usize;

    fn action(
        &self,
        node: NodeId,
        round: usize,
        input: &PrivateInput,
        history: &[ReceiveEvent],
    ) -> std::result::Result<NodeAction, String>;

    /// Seeded private inputs in the shape this protocol expects.
    fn inputs(&self, network: &Network, seed: u64) -> Vec<PrivateInput> {
        let rng = CounterRng::new(seed);
        network
            .nodes()
            .map(|v| PrivateInput::new(vec![random_payload(&rng, v, 0, 8)]))
            .collect()
    }
}

pub type SharedProtocol = Arc<dyn Protocol>;

pub(crate) fn random_payload(rng: &CounterRng, node: NodeId, index: u64, len: usize) -> Payload {
    let mut bytes = Vec::with_capacity(len);
    let mut word = 0u64;
    for i in 0..len {
        if i % 8 == 0 {
            word = rng.draw(Stream::Input, node, (index << 16) | (i as u64 / 8));
        }
        bytes.push((word >> (8 * (i % 8))) as u8);
    }
    Payload::new(bytes)
}

/// Asks `protocol` for its action, mapping failures to [`Error::Protocol`] and
/// enforcing the payload cap.
pub fn protocol_action(
    protocol: &dyn Protocol,
    node: NodeId,
    round: usize,
    input: &PrivateInput,
    history: &[ReceiveEvent],
    payload_cap: usize,
) -> Result<NodeAction> {
    let action = protocol
        .action(node, round, input, history)
        .map_err(|message| Error::Protocol { node, round, message })?;
    if let NodeAction::Broadcast(m) = &action {
        if m.len() > payload_cap {
            return Err(Error::Protocol {
                node,
                round,
                message: format!("payload of {} bytes exceeds the cap of {payload_cap}", m.len()),
            });
        }
    }
    Ok(action)
}

/// Runs `protocol` for exactly `max_rounds` rounds (nodes listen after the
/// protocol ends) and returns the full transcript.
pub fn run(
    network: &Network,
    protocol: &dyn Protocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    max_rounds: usize,
) -> Result<Transcript> {
    run_with_cap(network, protocol, inputs, noise, max_rounds, DEFAULT_PAYLOAD_CAP)
}

pub fn run_with_cap(
    network: &Network,
    protocol: &dyn Protocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    max_rounds: usize,
    payload_cap: usize,
) -> Result<Transcript> {
    if inputs.len() != network.len() {
        return Err(Error::config(format!(
            "expected {} private inputs, got {}",
            network.len(),
            inputs.len()
        )));
    }
    let n = network.len();
    let length = protocol.length();
    let mut histories = vec![History::new(); n];
    let mut rounds = Vec::with_capacity(max_rounds);
    for t in 1..=max_rounds {
        let actions = (0..n)
            .map(|v| {
                if t <= length {
                    protocol_action(protocol, v, t, &inputs[v], histories[v].events(), payload_cap)
                } else {
                    Ok(NodeAction::Listen)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let faults = noise.fault_vector(n, t as u64);
        for (v, got) in step(network, &actions, &faults)?.into_iter().enumerate() {
            if let Some(m) = got {
                histories[v].record(t, m);
            }
        }
        rounds.push(RoundLog { actions, faults });
    }
    Ok(Transcript {
        inputs: inputs.to_vec(),
        histories,
        rounds,
    })
}

/// What a node does in one round of the faultless run, with the resolved
/// delivery outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RoundRole {
    /// `sender` is the unique in-neighbor heard, if any.
    Listen { sender: Option<NodeId> },
    /// Neighbors that receive this broadcast without collision.
    Broadcast { receivers: Vec<NodeId> },
}

/// The faultless reference execution of a protocol, used as the ground truth
/// by the simulators' progress oracles and by the verification predicate.
#[derive(Clone, Debug)]
pub struct FaultlessRun {
    pub transcript: Transcript,
    roles: Vec<Vec<RoundRole>>,
}

impl FaultlessRun {
    pub fn new(network: &Network, protocol: &dyn Protocol, inputs: &[PrivateInput]) -> Result<Self> {
        Self::with_cap(network, protocol, inputs, DEFAULT_PAYLOAD_CAP)
    }

    pub fn with_cap(network: &Network, protocol: &dyn Protocol, inputs: &[PrivateInput], cap: usize) -> Result<Self> {
        let length = protocol.length();
        let transcript = run_with_cap(network, protocol, inputs, &NoiseModel::faultless(), length, cap)?;
        let n = network.len();
        let mut roles = vec![Vec::with_capacity(length); n];
        for t in 1..=length {
            let actions = &transcript.round(t).actions;
            let mut heard: Vec<Option<NodeId>> = vec![None; n];
            for v in 0..n {
                if actions[v].is_broadcast() {
                    continue;
                }
                let mut b = network.in_neighbors(v).iter().filter(|&&u| actions[u].is_broadcast());
                if let (Some(&u), None) = (b.next(), b.next()) {
                    heard[v] = Some(u);
                }
            }
            for v in 0..n {
                let role = if actions[v].is_broadcast() {
                    RoundRole::Broadcast {
                        receivers: network
                            .out_neighbors(v)
                            .iter()
                            .copied()
                            .filter(|&w| heard[w] == Some(v))
                            .collect(),
                    }
                } else {
                    RoundRole::Listen { sender: heard[v] }
                };
                roles[v].push(role);
            }
        }
        Ok(Self { transcript, roles })
    }

    pub fn length(&self) -> usize {
        self.transcript.len()
    }

    /// Role of `v` in round `t` (1-based).
    pub fn role(&self, v: NodeId, t: usize) -> &RoundRole {
        &self.roles[v][t - 1]
    }

    pub fn histories(&self) -> &[History] {
        &self.transcript.histories
    }
}
