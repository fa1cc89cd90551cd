//! Simulation of arbitrary protocols.
//!
//! A node advances past round `r` only after holding a token for round `r`
//! from every neighbor: either the neighbor's round-`r` payload or an
//! explicit "not broadcasting". Tokens move with randomized knowledge
//! sharing, so no acknowledgements are needed.

use crate::config::SimConstants;
use crate::error::{Error, Result};
use crate::model::{NodeAction, NoiseModel, Payload, Radio};
use crate::network::Network;
use crate::protocol::{protocol_action, FaultlessRun, PrivateInput, Protocol};
use crate::rng::Stream;
use crate::transcript::{verify_simulation, History};
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenContent {
    Payload(Payload),
    NotBroadcasting,
}

impl TokenContent {
    pub fn of(action: &NodeAction) -> Self {
        match action {
            NodeAction::Broadcast(m) => TokenContent::Payload(m.clone()),
            NodeAction::Listen => TokenContent::NotBroadcasting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub origin: NodeId,
    pub round: usize,
    pub content: TokenContent,
}

/// Tokens held by every node, indexed by (holder, neighbor position, round).
#[derive(Clone, Debug)]
pub struct TokenStore {
    neighbors: Vec<Vec<NodeId>>,
    slots: Vec<Vec<Vec<Option<TokenContent>>>>,
}

impl TokenStore {
    pub fn new(network: &Network, length: usize) -> Self {
        let neighbors: Vec<Vec<NodeId>> = network.nodes().map(|v| network.neighbors(v).to_vec()).collect();
        let slots = neighbors.iter().map(|nb| vec![vec![None; length]; nb.len()]).collect();
        Self { neighbors, slots }
    }

    fn position(&self, holder: NodeId, origin: NodeId) -> Option<usize> {
        self.neighbors[holder].binary_search(&origin).ok()
    }

    /// Stores `token` at `holder`; tokens from non-neighbors or outside
    /// `[1, T]` are ignored.
    pub fn insert(&mut self, holder: NodeId, token: Token) {
        if let Some(i) = self.position(holder, token.origin) {
            if let Some(slot) = token.round.checked_sub(1).and_then(|r| self.slots[holder][i].get_mut(r)) {
                *slot = Some(token.content);
            }
        }
    }

    pub fn get(&self, holder: NodeId, origin: NodeId, round: usize) -> Option<&TokenContent> {
        let i = self.position(holder, origin)?;
        self.slots[holder][i].get(round.checked_sub(1)?)?.as_ref()
    }

    /// Whether `holder` has the round-`round` token of every neighbor.
    pub fn complete(&self, holder: NodeId, round: usize) -> bool {
        self.slots[holder].iter().all(|s| s[round - 1].is_some())
    }

    pub fn neighbors(&self, holder: NodeId) -> &[NodeId] {
        &self.neighbors[holder]
    }
}

/// What `v` heard in round `round`, given its own action and the neighbor
/// tokens: the payload of the unique broadcasting neighbor, if any.
fn heard(store: &TokenStore, v: NodeId, round: usize, own: &NodeAction) -> Result<Option<Payload>> {
    let mut only = None;
    let mut count = 0;
    for &w in store.neighbors(v) {
        match store.get(v, w, round) {
            None => return Err(Error::IncompleteHistory { node: v, round }),
            Some(TokenContent::Payload(m)) => {
                count += 1;
                only = Some(m);
            }
            Some(TokenContent::NotBroadcasting) => {}
        }
    }
    Ok(match (own, count) {
        (NodeAction::Listen, 1) => only.cloned(),
        _ => None,
    })
}

/// Rebuilds `v`'s history for rounds `< upto` from its tokens, recomputing
/// its own actions causally.
pub fn reconstruct_history(
    store: &TokenStore,
    protocol: &dyn Protocol,
    input: &PrivateInput,
    v: NodeId,
    upto: usize,
) -> Result<History> {
    let mut h = History::new();
    for r in 1..upto {
        let own = protocol
            .action(v, r, input, h.events())
            .map_err(|message| Error::Protocol { node: v, round: r, message })?;
        if let Some(m) = heard(store, v, r, &own)? {
            h.record(r, m);
        }
    }
    Ok(h)
}

/// Randomized knowledge sharing over a shared round counter.
///
/// Each round every node holding a message broadcasts it with probability
/// `1 / max(Δ, 2)`. `on_receive(listener, sender)` fires on every reception.
pub struct Sharing<'a> {
    network: &'a Network,
    noise: &'a NoiseModel,
    length: u64,
    lossless: bool,
    round: u64,
    radio: Radio,
}

impl<'a> Sharing<'a> {
    pub fn new(network: &'a Network, noise: &'a NoiseModel, consts: &SimConstants, lossless: bool) -> Self {
        Self {
            network,
            noise,
            length: consts.share_rounds(network.delta()) as u64,
            lossless,
            round: 0,
            radio: Radio::new(network.len()),
        }
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    /// Runs one call. Stops simulating once every node has heard every
    /// neighbor that holds a message; the full length is charged regardless.
    pub fn share(&mut self, has_message: &[bool], mut on_receive: impl FnMut(NodeId, NodeId)) {
        let net = self.network;
        let start = self.round;
        self.round += self.length;
        let mut missing: Vec<Vec<bool>> = net
            .nodes()
            .map(|v| net.neighbors(v).iter().map(|&w| has_message[w]).collect())
            .collect();
        let mut pending: usize = missing.iter().map(|m| m.iter().filter(|&&b| b).count()).sum();
        if self.lossless {
            for v in net.nodes() {
                for &w in net.neighbors(v) {
                    if has_message[w] {
                        on_receive(v, w);
                    }
                }
            }
            return;
        }
        let prob = 1.0 / net.delta().max(2) as f64;
        let coins = *self.noise.rng();
        let holders: Vec<NodeId> = net.nodes().filter(|&v| has_message[v]).collect();
        let mut firing = Vec::new();
        let mut is_b = vec![false; net.len()];
        for k in 0..self.length {
            if pending == 0 {
                break;
            }
            let round = start + k + 1;
            for &v in &firing {
                is_b[v] = false;
            }
            firing.clear();
            for &v in &holders {
                if coins.bernoulli(prob, Stream::Share, v, round) {
                    firing.push(v);
                    is_b[v] = true;
                }
            }
            let is_b = &is_b;
            let missing = &mut missing;
            let pending = &mut pending;
            self.radio.deliver(net, self.noise, round, &firing, |w| !is_b[w], |w, s| {
                if let Ok(i) = net.neighbors(w).binary_search(&s) {
                    if missing[w][i] {
                        missing[w][i] = false;
                        *pending -= 1;
                    }
                }
                on_receive(w, s);
            });
        }
    }
}

/// One knowledge-sharing call: per node, the `(sender, message)` pairs it
/// heard, first reception only.
pub fn share_knowledge<M: Clone>(sharing: &mut Sharing<'_>, messages: &[Option<M>]) -> Vec<Vec<(NodeId, M)>> {
    let has: Vec<bool> = messages.iter().map(Option::is_some).collect();
    let mut got: Vec<Vec<(NodeId, M)>> = vec![Vec::new(); messages.len()];
    sharing.share(&has, |w, s| {
        if !got[w].iter().any(|&(x, _)| x == s) {
            if let Some(m) = &messages[s] {
                got[w].push((s, m.clone()));
            }
        }
    });
    got
}

#[derive(Clone, Debug)]
pub struct GeneralReport {
    pub length: usize,
    pub histories: Vec<History>,
    pub verified: Vec<bool>,
    pub final_t: Vec<usize>,
    pub iterations: usize,
    pub rounds_used: u64,
    pub budget: u64,
    /// Stored tokens that differ from the faultless run's token.
    pub token_mismatches: usize,
    /// Iterations in which a node was minimal in its 2-hop neighborhood, and
    /// how many of those advanced it.
    pub local_opportunities: u64,
    pub local_advances: u64,
}

impl GeneralReport {
    pub fn all_verified(&self) -> bool {
        self.verified.iter().all(|&b| b)
    }

    pub fn finished(&self) -> bool {
        self.final_t.iter().all(|&t| t > self.length)
    }
}

pub const CSV_HEADER: &str = "graph,Δ,n,T,p,c4,c5,seed,total_rounds,verified";

pub fn csv_row(
    graph: &str,
    network: &Network,
    t_len: usize,
    p: f64,
    consts: &SimConstants,
    seed: u64,
    report: &GeneralReport,
) -> String {
    format!(
        "{graph},{},{},{t_len},{p},{},{},{seed},{},{}",
        network.max_degree(),
        network.len(),
        consts.c4,
        consts.c5,
        report.rounds_used,
        u8::from(report.all_verified())
    )
}

pub fn run(
    network: &Network,
    protocol: &dyn Protocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    consts: &SimConstants,
) -> Result<GeneralReport> {
    main_general(network, protocol, inputs, noise, consts, false)
}

/// The general simulator. With `lossless` set, knowledge sharing delivers
/// every message (a test mode).
pub fn main_general(
    network: &Network,
    protocol: &dyn Protocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    consts: &SimConstants,
    lossless: bool,
) -> Result<GeneralReport> {
    if network.is_directed() {
        return Err(Error::Directed("the general simulator"));
    }
    let truth = FaultlessRun::with_cap(network, protocol, inputs, consts.payload_cap)?;
    let n = network.len();
    let t_len = protocol.length();
    let budget_iters = consts.general_iterations(t_len, network.delta(), n);
    let mut sharing = Sharing::new(network, noise, consts, lossless);
    let mut store = TokenStore::new(network, t_len);
    let mut t = vec![1usize; n];
    let mut histories = vec![History::new(); n];
    let mut own: Vec<Vec<Option<NodeAction>>> = vec![vec![None; t_len]; n];
    let mut mismatches = 0;
    let mut opportunities = 0;
    let mut advances = 0;
    let mut iterations = 0;

    let own_action = |own: &mut Vec<Vec<Option<NodeAction>>>, histories: &[History], v: NodeId, r: usize| -> Result<NodeAction> {
        if own[v][r - 1].is_none() {
            own[v][r - 1] = Some(protocol_action(protocol, v, r, &inputs[v], histories[v].before(r), consts.payload_cap)?);
        }
        Ok(own[v][r - 1].clone().unwrap())
    };
    // Advances every node while its tokens allow, extending its history.
    let advance = |t: &mut Vec<usize>,
                   histories: &mut Vec<History>,
                   own: &mut Vec<Vec<Option<NodeAction>>>,
                   store: &TokenStore|
     -> Result<()> {
        for v in 0..n {
            while t[v] <= t_len && store.complete(v, t[v]) {
                let r = t[v];
                let a = own_action(own, histories, v, r)?;
                if let Some(m) = heard(store, v, r, &a)? {
                    histories[v].record(r, m);
                }
                t[v] += 1;
            }
        }
        Ok(())
    };
    advance(&mut t, &mut histories, &mut own, &store)?;

    for _ in 0..budget_iters {
        if t.iter().all(|&x| x > t_len) {
            break;
        }
        iterations += 1;
        let two_hop_min: Vec<usize> = {
            let one: Vec<usize> = (0..n)
                .map(|v| network.neighbors(v).iter().map(|&w| t[w]).fold(t[v], usize::min))
                .collect();
            (0..n)
                .map(|v| network.neighbors(v).iter().map(|&w| one[w]).fold(one[v], usize::min))
                .collect()
        };
        let watched: Vec<(NodeId, usize)> = (0..n)
            .filter(|&v| t[v] <= t_len && two_hop_min[v] >= t[v])
            .map(|v| (v, t[v]))
            .collect();

        let rounds: Vec<Option<usize>> = t.iter().map(|&x| Some(x)).collect();
        let heard_t = share_knowledge(&mut sharing, &rounds);
        let m: Vec<usize> = (0..n)
            .map(|v| heard_t[v].iter().map(|&(_, x)| x).fold(t[v], usize::min))
            .collect();

        let tokens: Vec<Option<Token>> = (0..n)
            .map(|v| {
                if m[v] > t_len {
                    return Ok(None);
                }
                let a = own_action(&mut own, &histories, v, m[v])?;
                Ok(Some(Token {
                    origin: v,
                    round: m[v],
                    content: TokenContent::of(&a),
                }))
            })
            .collect::<Result<_>>()?;
        for (w, got) in share_knowledge(&mut sharing, &tokens).into_iter().enumerate() {
            for (_, tok) in got {
                let expected = TokenContent::of(&truth.transcript.round(tok.round).actions[tok.origin]);
                if tok.content != expected {
                    mismatches += 1;
                }
                store.insert(w, tok);
            }
        }
        advance(&mut t, &mut histories, &mut own, &store)?;
        opportunities += watched.len() as u64;
        advances += watched.iter().filter(|&&(v, x)| t[v] > x).count() as u64;
    }

    let verified = verify_simulation(&truth.transcript, &histories);
    Ok(GeneralReport {
        length: t_len,
        histories,
        verified,
        final_t: t,
        iterations,
        rounds_used: sharing.rounds(),
        budget: budget_iters as u64 * 2 * sharing.length(),
        token_mismatches: mismatches,
        local_opportunities: opportunities,
        local_advances: advances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{path, star};
    use crate::protocols::{SourceFlood, Silent};

    fn tok(origin: NodeId, round: usize, content: TokenContent) -> Token {
        Token { origin, round, content }
    }

    #[test]
    fn reconstruction_rules() {
        // Path 0-1-2, node 1 in the middle listens.
        let p = path(3).unwrap();
        let mut store = TokenStore::new(&p, 3);
        let a = Payload::new(vec![0xa]);
        let b = Payload::new(vec![0xb]);
        store.insert(1, tok(0, 1, TokenContent::NotBroadcasting));
        store.insert(1, tok(2, 1, TokenContent::NotBroadcasting));
        store.insert(1, tok(0, 2, TokenContent::Payload(a.clone())));
        store.insert(1, tok(2, 2, TokenContent::NotBroadcasting));
        store.insert(1, tok(0, 3, TokenContent::Payload(a.clone())));
        store.insert(1, tok(2, 3, TokenContent::Payload(b)));
        let h = reconstruct_history(&store, &Silent::new(3), &PrivateInput::default(), 1, 4).unwrap();
        assert_eq!(h.rounds(), vec![2]);
        assert_eq!(h.events()[0].payload, a);
        let err = reconstruct_history(&store, &Silent::new(3), &PrivateInput::default(), 0, 2).unwrap_err();
        assert!(matches!(err, Error::IncompleteHistory { node: 0, round: 1 }));
    }

    #[test]
    fn all_silent_tokens_give_empty_history() {
        let s = star(3).unwrap();
        let mut store = TokenStore::new(&s, 2);
        for r in 1..=2 {
            for leaf in 1..=3 {
                store.insert(0, tok(leaf, r, TokenContent::NotBroadcasting));
            }
        }
        let h = reconstruct_history(&store, &Silent::new(2), &PrivateInput::default(), 0, 3).unwrap();
        assert!(h.is_empty());
    }

    #[test]
    fn isolated_pair_has_nothing_to_hear_from_strangers() {
        let p = path(3).unwrap();
        let mut store = TokenStore::new(&p, 1);
        store.insert(0, tok(2, 1, TokenContent::NotBroadcasting));
        assert!(store.get(0, 2, 1).is_none());
    }

    #[test]
    fn lossless_edge_finishes_in_one_iteration() {
        let e = path(2).unwrap();
        let p = SourceFlood::new(0, 1);
        let r = main_general(&e, &p, &p.inputs(&e, 0), &NoiseModel::faultless(), &SimConstants::default(), true).unwrap();
        assert!(r.all_verified());
        assert_eq!(r.iterations, 1);
        assert_eq!(r.token_mismatches, 0);
    }

    #[test]
    fn share_knowledge_empty_neighborhood() {
        let e = Network::from_edges(1, &[], false).unwrap();
        let noise = NoiseModel::new(0.3, 1).unwrap();
        let mut sh = Sharing::new(&e, &noise, &SimConstants::default(), false);
        let got = share_knowledge(&mut sh, &[Some(5u8)]);
        assert!(got[0].is_empty());
    }
}
