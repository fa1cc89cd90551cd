//! Simulation of static protocols without progress detection.
//!
//! Every node learns the smallest virtual round around it with a distributed
//! binary search, then plays that round. A global throttle `L` keeps all
//! virtual rounds inside a window of width `Q` so the search stays short.

use crate::config::{ceil_log2, lg, SimConstants};
use crate::error::{Error, Result};
use crate::model::{NodeAction, NoiseModel, Payload, Radio};
use crate::network::Network;
use crate::protocol::{protocol_action, PrivateInput, Protocol};
use crate::protocols::StaticProtocol;
use crate::rng::Stream;
use crate::transcript::{verify_simulation, History, Transcript};
use crate::NodeId;

/// Answer of the distance probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Distance {
    Zero,
    One,
    Two,
    Far,
}

impl Distance {
    pub fn label(self) -> &'static str {
        match self {
            Distance::Zero => "=0",
            Distance::One => "=1",
            Distance::Two => "=2",
            Distance::Far => ">2",
        }
    }
}

/// State of one binary-search iteration, recorded for the invariant checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchStep {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub active: Vec<bool>,
    /// Silent flags after this iteration's update.
    pub silent: Vec<bool>,
    pub dist: Vec<Distance>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchTrace {
    pub steps: Vec<SearchStep>,
}

/// The synchronized subroutines, sharing one physical round counter.
///
/// In oracle mode every broadcast is lossless, so distance labels are exact;
/// rounds are still charged at their nominal length.
pub struct Primitives<'a> {
    network: &'a Network,
    noise: &'a NoiseModel,
    consts: SimConstants,
    oracle: bool,
    round: u64,
    radio: Radio,
}

impl<'a> Primitives<'a> {
    pub fn new(network: &'a Network, noise: &'a NoiseModel, consts: SimConstants, oracle: bool) -> Self {
        Self {
            network,
            noise,
            consts,
            oracle,
            round: 0,
            radio: Radio::new(network.len()),
        }
    }

    pub fn with_start(mut self, round: u64) -> Self {
        self.round = round;
        self
    }

    /// Physical rounds consumed so far.
    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn broadcast_length(&self) -> u64 {
        self.consts.broadcast_rounds(self.network.delta(), self.network.len()) as u64
    }

    /// Rounds of one binary search over a window of `width` values.
    pub fn search_length(&self, width: usize) -> u64 {
        2 * self.broadcast_length() * ceil_log2(width) as u64
    }

    /// One Decay broadcast from the `senders`; `on_receive(listener, sender)`
    /// fires at most once per listener.
    fn decay(&mut self, senders: &[bool], mut on_receive: impl FnMut(NodeId, NodeId)) {
        let net = self.network;
        let start = self.round;
        let length = self.broadcast_length();
        self.round = start + length;
        let ids: Vec<NodeId> = net.nodes().filter(|&v| senders[v]).collect();
        let mut received = vec![false; net.len()];
        let mut pending = 0usize;
        for &s in &ids {
            for &w in net.out_neighbors(s) {
                if !senders[w] && !received[w] {
                    received[w] = true;
                    pending += 1;
                    if self.oracle {
                        on_receive(w, s);
                    }
                }
            }
        }
        if self.oracle || pending == 0 {
            return;
        }
        received.iter_mut().for_each(|r| *r = false);
        let inner = lg(net.delta()) as u64;
        let coins = *self.noise.rng();
        let mut firing = Vec::with_capacity(ids.len());
        for k in 0..length {
            let round = start + k + 1;
            let i = (k % inner) as u32 + 1;
            firing.clear();
            firing.extend(ids.iter().copied().filter(|&v| coins.dyadic(i, Stream::Decay, v, round)));
            let received_ref = &mut received;
            self.radio.deliver(net, self.noise, round, &firing, |w| !senders[w], |w, s| {
                if !received_ref[w] {
                    received_ref[w] = true;
                    pending -= 1;
                    on_receive(w, s);
                }
            });
            if pending == 0 {
                break;
            }
        }
    }

    /// Decay broadcast: returns which nodes received.
    pub fn broadcast(&mut self, senders: &[bool]) -> Vec<bool> {
        let mut got = vec![false; self.network.len()];
        self.decay(senders, |w, _| got[w] = true);
        got
    }

    /// Two broadcast phases: active nodes send `X`, nodes that heard `X` send `Y`.
    pub fn dist_to_active(&mut self, active: &[bool]) -> Vec<Distance> {
        let x = self.broadcast(active);
        let y = self.broadcast(&x);
        (0..self.network.len())
            .map(|v| {
                if active[v] {
                    Distance::Zero
                } else if x[v] {
                    Distance::One
                } else if y[v] {
                    Distance::Two
                } else {
                    Distance::Far
                }
            })
            .collect()
    }

    /// Binary search for the smallest virtual round around each node over
    /// `[lo, hi]`, with silencing. Returns each node's final `lo`.
    pub fn learn_delays(&mut self, t: &[usize], lo: usize, hi: usize, mut trace: Option<&mut SearchTrace>) -> Result<Vec<usize>> {
        let n = self.network.len();
        if lo > hi {
            return Err(Error::param(format!("empty search window [{lo}, {hi}]")));
        }
        if self.oracle {
            if let Some(v) = (0..n).find(|&v| t[v] < lo || t[v] > hi) {
                return Err(Error::Window { node: v, value: t[v], lo, hi });
            }
        }
        let mut lo_v = vec![lo; n];
        let mut hi_v = vec![hi; n];
        let mut silent = vec![false; n];
        for _ in 0..ceil_log2(hi - lo + 1) {
            let active: Vec<bool> = (0..n)
                .map(|v| !silent[v] && lo_v[v] != hi_v[v] && t[v] <= (lo_v[v] + hi_v[v]) / 2)
                .collect();
            let dist = self.dist_to_active(&active);
            let before = trace.as_ref().map(|_| (lo_v.clone(), hi_v.clone()));
            for v in 0..n {
                if lo_v[v] == hi_v[v] {
                    continue;
                }
                let mid = (lo_v[v] + hi_v[v]) / 2;
                if dist[v] == Distance::Two {
                    silent[v] = true;
                }
                match dist[v] {
                    Distance::Zero | Distance::One => hi_v[v] = mid,
                    _ => lo_v[v] = mid + 1,
                }
            }
            if let (Some(tr), Some((lo, hi))) = (trace.as_deref_mut(), before) {
                tr.steps.push(SearchStep {
                    lo,
                    hi,
                    active,
                    silent: silent.clone(),
                    dist,
                });
            }
        }
        Ok(lo_v)
    }

    /// Advances the counter by one action round and returns its index.
    fn action_round(&mut self) -> u64 {
        self.round += 1;
        self.round
    }
}

/// Decay broadcast of per-node messages; non-senders report what they heard.
pub fn broadcast_decay<M: Clone>(prim: &mut Primitives<'_>, messages: &[Option<M>]) -> Vec<Option<M>> {
    let senders: Vec<bool> = messages.iter().map(Option::is_some).collect();
    let mut got: Vec<Option<M>> = vec![None; messages.len()];
    prim.decay(&senders, |w, s| got[w] = messages[s].clone());
    got
}

/// Oracle-mode binary search, with its trace.
pub fn learn_delays_oracle(network: &Network, t: &[usize], lo: usize, hi: usize) -> Result<(Vec<usize>, SearchTrace)> {
    let noise = NoiseModel::faultless();
    let mut prim = Primitives::new(network, &noise, SimConstants::default(), true);
    let mut trace = SearchTrace::default();
    let m = prim.learn_delays(t, lo, hi, Some(&mut trace))?;
    Ok((m, trace))
}

/// Nodes whose `t` is minimal within their closed 2-hop neighborhood.
pub fn most_delayed(network: &Network, t: &[usize]) -> Vec<NodeId> {
    network
        .nodes()
        .filter(|&v| network.ball(v, 2).iter().all(|&w| t[w] >= t[v]))
        .collect()
}

/// Checks the three inductive properties of the search for every most
/// delayed node, plus silencing soundness, on an oracle-mode trace.
pub fn check_search_invariants(network: &Network, t: &[usize], trace: &SearchTrace) -> std::result::Result<(), String> {
    let n = network.len();
    for v in 0..n {
        let mut was_silent = false;
        for (i, st) in trace.steps.iter().enumerate() {
            if was_silent && st.active[v] {
                return Err(format!("silent node {v} active in iteration {i}"));
            }
            if st.lo[v] > st.hi[v] {
                return Err(format!("node {v} has lo > hi in iteration {i}"));
            }
            was_silent |= st.silent[v];
        }
    }
    for v in most_delayed(network, t) {
        let ring: Vec<NodeId> = network.ball(v, 2).into_iter().filter(|w| !network.neighbors(v).contains(w) && *w != v).collect();
        let mut deviated = vec![false; n];
        for (i, st) in trace.steps.iter().enumerate() {
            if st.silent[v] {
                return Err(format!("most delayed node {v} silenced in iteration {i}"));
            }
            for &u in network.neighbors(v) {
                if (st.lo[u], st.hi[u]) != (st.lo[v], st.hi[v]) {
                    return Err(format!("neighbor {u} of {v} deviates in iteration {i}"));
                }
            }
            for &w in &ring {
                if deviated[w] && st.active[w] {
                    return Err(format!("deviating node {w} near {v} active in iteration {i}"));
                }
                if (st.lo[w], st.hi[w]) != (st.lo[v], st.hi[v]) {
                    deviated[w] = true;
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct StaticReport {
    pub histories: Vec<History>,
    pub verified: Vec<bool>,
    /// Physical rounds until every schedule was fulfilled (or the budget).
    pub rounds_used: u64,
    pub budget: u64,
    pub next_round: Vec<usize>,
    /// Largest `max t - min t` seen at an outer-iteration boundary.
    pub max_window_spread: usize,
    /// Outer boundaries at which the spread exceeded `Q`.
    pub window_violations: usize,
    pub window: usize,
    pub outer_iterations: usize,
}

impl StaticReport {
    pub fn all_verified(&self) -> bool {
        self.verified.iter().all(|&b| b)
    }

    pub fn finished(&self) -> bool {
        let sentinel = self.next_round.iter().copied().max().unwrap_or(0);
        self.next_round.iter().all(|&r| r == sentinel)
    }
}

pub const CSV_HEADER: &str = "graph,Δ,n,T,p,c1,c3,cQ,seed,total_rounds,verified,max_window_spread";

pub fn csv_row(
    graph: &str,
    network: &Network,
    t_len: usize,
    p: f64,
    consts: &SimConstants,
    seed: u64,
    report: &StaticReport,
) -> String {
    format!(
        "{graph},{},{},{t_len},{p},{},{},{},{seed},{},{},{}",
        network.max_degree(),
        network.len(),
        consts.c1,
        consts.c3,
        consts.cq,
        report.rounds_used,
        u8::from(report.all_verified()),
        report.max_window_spread
    )
}

/// The static simulator. `truth` is the faultless transcript used only for
/// the final verification.
pub fn main_static(
    network: &Network,
    protocol: &StaticProtocol,
    inputs: &[PrivateInput],
    truth: &Transcript,
    noise: &NoiseModel,
    consts: &SimConstants,
    oracle: bool,
) -> Result<StaticReport> {
    if network.is_directed() {
        return Err(Error::Directed("the static simulator"));
    }
    let n = network.len();
    let t_len = protocol.length();
    let schedule = protocol.schedule();
    if schedule.len() != n || inputs.len() != n {
        return Err(Error::config("schedule and inputs must cover every node"));
    }
    let q = consts.window(n);
    let inner = consts.static_inner(network.delta());
    let outer = t_len + q;
    let mut prim = Primitives::new(network, noise, *consts, oracle);
    let per_inner = prim.search_length(q + 1) + 1;
    let budget = outer as u64 * inner as u64 * per_inner;

    let mut cursors: Vec<_> = (0..n).map(|v| schedule.cursor(v)).collect();
    let mut histories = vec![History::new(); n];
    let mut cache: Vec<Vec<Option<NodeAction>>> = vec![vec![None; t_len]; n];
    let mut max_spread = 0;
    let mut violations = 0;
    let mut outer_done = 0;
    let mut rounds_used = None;
    let mut radio = Radio::new(n);
    let mut tag = vec![0usize; n];
    let mut is_b = vec![false; n];
    let mut broadcasters = Vec::new();

    'outer: for l in 1..=outer {
        if cursors.iter().all(|c| c.is_done()) {
            rounds_used = Some(prim.rounds());
            break;
        }
        outer_done = l;
        let t: Vec<usize> = cursors.iter().map(|c| c.next_round().min(l)).collect();
        let spread = t.iter().max().unwrap() - t.iter().min().unwrap();
        max_spread = max_spread.max(spread);
        if spread > q {
            violations += 1;
        }
        for _ in 0..inner {
            let t: Vec<usize> = cursors.iter().map(|c| c.next_round().min(l)).collect();
            let m = prim.learn_delays(&t, l.saturating_sub(q), l, None)?;
            let round = prim.action_round();
            broadcasters.clear();
            for v in 0..n {
                is_b[v] = false;
                let r = m[v];
                tag[v] = r;
                if r == 0 || r > t_len.min(cursors[v].next_round()) {
                    continue;
                }
                if cache[v][r - 1].is_none() {
                    let a = protocol_action(protocol, v, r, &inputs[v], histories[v].before(r), consts.payload_cap)?;
                    cache[v][r - 1] = Some(a);
                }
                if cache[v][r - 1].as_ref().is_some_and(NodeAction::is_broadcast) {
                    is_b[v] = true;
                    broadcasters.push(v);
                }
            }
            let mut heard: Vec<(NodeId, NodeId)> = Vec::new();
            radio.deliver(network, noise, round, &broadcasters, |w| !is_b[w], |w, s| heard.push((w, s)));
            for (w, s) in heard {
                let want = cursors[w].next_round();
                if m[w] == want && tag[s] == want {
                    if let Some(NodeAction::Broadcast(msg)) = &cache[s][want - 1] {
                        histories[w].record(want, Payload::clone(msg));
                        cursors[w].fulfill();
                    }
                }
            }
            if cursors.iter().all(|c| c.is_done()) {
                rounds_used = Some(prim.rounds());
                break 'outer;
            }
        }
    }
    let verified = verify_simulation(truth, &histories);
    Ok(StaticReport {
        histories,
        verified,
        rounds_used: rounds_used.unwrap_or(prim.rounds()),
        budget,
        next_round: cursors.iter().map(|c| c.next_round()).collect(),
        max_window_spread: max_spread,
        window_violations: violations,
        window: q,
        outer_iterations: outer_done,
    })
}

/// Derives the schedule, runs the faultless reference and the simulator.
pub fn run(
    network: &Network,
    protocol: crate::protocol::SharedProtocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    consts: &SimConstants,
    oracle: bool,
) -> Result<StaticReport> {
    if network.is_directed() {
        return Err(Error::Directed("the static simulator"));
    }
    let sp = StaticProtocol::derive(protocol, network, inputs, noise.seed())?;
    let truth = crate::protocol::run_with_cap(network, &sp, inputs, &NoiseModel::faultless(), sp.length(), consts.payload_cap)?;
    main_static(network, &sp, inputs, &truth, noise, consts, oracle)
}
