use crate::model::NodeAction;
use crate::network::Network;
use crate::protocol::{random_payload, PrivateInput, Protocol};
use crate::rng::{CounterRng, Stream};
use crate::transcript::ReceiveEvent;
use crate::NodeId;

use super::MESSAGE_BYTES;

/// One Decay step: an informed node broadcasts with probability `2^-i`.
pub fn decay_round(v: NodeId, informed: bool, i: u32, coins: &CounterRng, stream: Stream, round: u64) -> NodeAction<()> {
    if informed && coins.dyadic(i, stream, v, round) {
        NodeAction::Broadcast(())
    } else {
        NodeAction::Listen
    }
}

/// Multi-hop Decay flood of one source payload driven by public coins.
///
/// Round `t` uses exponent `((t - 1) mod k) + 1`. Whether a node broadcasts
/// depends only on the coins and on whether it has heard anything, never on
/// payload contents, so the receive pattern is input-independent.
#[derive(Clone, Debug)]
pub struct DecayFlood {
    source: NodeId,
    inner: usize,
    length: usize,
    coins: CounterRng,
}

impl DecayFlood {
    pub fn new(source: NodeId, inner: usize, length: usize, seed: u64) -> Self {
        Self {
            source,
            inner: inner.max(1),
            length,
            coins: CounterRng::new(seed),
        }
    }
}

impl Protocol for DecayFlood {
    fn name(&self) -> String {
        format!("decay:{}", self.length)
    }

    fn length(&self) -> usize {
        self.length
    }

    fn action(&self, node: NodeId, round: usize, input: &PrivateInput, history: &[ReceiveEvent]) -> Result<NodeAction, String> {
        let message = if node == self.source {
            input.payloads.first().cloned()
        } else {
            history.first().map(|e| e.payload.clone())
        };
        let i = ((round - 1) % self.inner) as u32 + 1;
        Ok(
            match decay_round(node, message.is_some(), i, &self.coins, Stream::Protocol, round as u64) {
                NodeAction::Broadcast(()) => NodeAction::Broadcast(message.expect("informed")),
                NodeAction::Listen => NodeAction::Listen,
            },
        )
    }

    fn inputs(&self, network: &Network, seed: u64) -> Vec<PrivateInput> {
        let rng = CounterRng::new(seed);
        network
            .nodes()
            .map(|v| {
                if v == self.source {
                    PrivateInput::new(vec![random_payload(&rng, v, 0, MESSAGE_BYTES)])
                } else {
                    PrivateInput::default()
                }
            })
            .collect()
    }
}
