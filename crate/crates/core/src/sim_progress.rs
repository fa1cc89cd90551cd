//! Simulation under local progress detection: every node plays the round of
//! the most delayed node in its closed neighborhood.
//!
//! The virtual rounds `t_v` are maintained by the engine from the faultless
//! reference run; node logic only ever reads its own history and the
//! neighbors' `t` values, which is exactly what progress detection grants.

use crate::config::SimConstants;
use crate::error::{Error, Result};
use crate::model::{NodeAction, NoiseModel, Payload, Radio};
use crate::network::Network;
use crate::protocol::{protocol_action, FaultlessRun, PrivateInput, Protocol, RoundRole};
use crate::transcript::{verify_simulation, History};
use crate::NodeId;

/// `done[v][x - 1]` is the simulation round after which `v` had completed
/// round `x` of the protocol (0 when it was complete from the start).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletionTable {
    length: usize,
    done: Vec<Vec<Option<u64>>>,
}

impl CompletionTable {
    pub fn new(n: usize, length: usize) -> Self {
        Self {
            length,
            done: vec![vec![None; length]; n],
        }
    }

    pub fn from_rows(length: usize, done: Vec<Vec<Option<u64>>>) -> Self {
        Self { length, done }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    /// `D_{v,x}`: earliest round with `t_v > x`; `D_{v,0} = 0`.
    pub fn get(&self, v: NodeId, x: usize) -> Option<u64> {
        if x == 0 {
            Some(0)
        } else {
            self.done[v][x - 1]
        }
    }

    fn set(&mut self, v: NodeId, x: usize, round: u64) {
        self.done[v][x - 1] = Some(round);
    }

    pub fn completion(&self, v: NodeId) -> Option<u64> {
        self.get(v, self.length)
    }

    pub fn is_complete(&self) -> bool {
        self.done.iter().all(|row| row.iter().all(Option::is_some))
    }
}

#[derive(Clone, Debug)]
pub struct ProgressReport {
    pub histories: Vec<History>,
    pub verified: Vec<bool>,
    pub table: CompletionTable,
    /// Virtual rounds when the run stopped.
    pub final_t: Vec<usize>,
    /// Simulation rounds actually executed.
    pub rounds_used: u64,
    pub budget: u64,
    /// Rounds in which a node was minimal in its 2-hop neighborhood with a
    /// pending listen, and how many of those advanced it.
    pub local_opportunities: u64,
    pub local_advances: u64,
}

impl ProgressReport {
    pub fn all_verified(&self) -> bool {
        self.verified.iter().all(|&b| b)
    }

    pub fn finished(&self) -> bool {
        self.table.is_complete()
    }

    pub fn max_completion_round(&self) -> Option<u64> {
        (0..self.table.len()).map(|v| self.table.completion(v)).try_fold(0, |m, c| c.map(|c| m.max(c)))
    }
}

pub const CSV_HEADER: &str = "graph,Δ,n,T,p,seed,max_completion_round,verified";

/// One CSV row in the [`CSV_HEADER`] layout. An unfinished run reports its
/// budget as the completion round.
pub fn csv_row(graph: &str, network: &Network, t_len: usize, p: f64, seed: u64, report: &ProgressReport) -> String {
    format!(
        "{graph},{},{},{t_len},{p},{seed},{},{}",
        network.max_degree(),
        network.len(),
        report.max_completion_round().unwrap_or(report.budget),
        u8::from(report.all_verified())
    )
}

/// Runs with the default budget `k * (T lg Δ + ceil(ln n))`.
pub fn run(
    network: &Network,
    protocol: &dyn Protocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    consts: &SimConstants,
) -> Result<ProgressReport> {
    let budget = consts.progress_rounds(protocol.length(), network.delta(), network.len());
    simulate_with_progress_detection(network, protocol, inputs, noise, budget as u64, consts.payload_cap)
}

fn completed(run: &FaultlessRun, t: &[usize], histories: &[History], v: NodeId, r: usize) -> bool {
    match run.role(v, r) {
        RoundRole::Listen { sender: None } => true,
        RoundRole::Listen { sender: Some(_) } => histories[v].events().last().is_some_and(|e| e.round == r),
        RoundRole::Broadcast { receivers } => receivers.iter().all(|&w| t[w] > r),
    }
}

pub fn simulate_with_progress_detection(
    network: &Network,
    protocol: &dyn Protocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    budget: u64,
    payload_cap: usize,
) -> Result<ProgressReport> {
    if network.is_directed() {
        return Err(Error::Directed("the progress-detection simulator"));
    }
    let truth = FaultlessRun::with_cap(network, protocol, inputs, payload_cap)?;
    let n = network.len();
    let t_len = protocol.length();
    let mut t = vec![1usize; n];
    let mut histories = vec![History::new(); n];
    let mut table = CompletionTable::new(n, t_len);
    let mut cache: Vec<Vec<Option<NodeAction>>> = vec![vec![None; t_len]; n];

    let advance = |t: &mut Vec<usize>, histories: &[History], table: &mut CompletionTable, round: u64| {
        loop {
            let mut changed = false;
            for v in 0..n {
                while t[v] <= t_len && completed(&truth, t, histories, v, t[v]) {
                    table.set(v, t[v], round);
                    t[v] += 1;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    };
    advance(&mut t, &histories, &mut table, 0);

    let mut radio = Radio::new(n);
    let mut nbr_min = vec![(0usize, 0usize); n];
    let mut playing = vec![0usize; n];
    let mut is_b = vec![false; n];
    let mut broadcasters = Vec::new();
    let mut rounds_used = 0;
    let mut opportunities = 0;
    let mut advances = 0;
    for s in 1..=budget {
        if t.iter().all(|&x| x > t_len) {
            break;
        }
        rounds_used = s;
        for v in 0..n {
            nbr_min[v] = network
                .neighbors(v)
                .iter()
                .map(|&w| (t[w], w))
                .fold((t[v], v), |a, b| a.min(b));
        }
        broadcasters.clear();
        for v in 0..n {
            let r = nbr_min[v].0;
            playing[v] = r;
            is_b[v] = false;
            if r > t_len {
                continue;
            }
            if cache[v][r - 1].is_none() {
                let a = protocol_action(protocol, v, r, &inputs[v], histories[v].before(r), payload_cap)?;
                cache[v][r - 1] = Some(a);
            }
            if cache[v][r - 1].as_ref().is_some_and(NodeAction::is_broadcast) {
                is_b[v] = true;
                broadcasters.push(v);
            }
        }
        let mut watched = Vec::new();
        for v in 0..n {
            if t[v] <= t_len
                && matches!(truth.role(v, t[v]), RoundRole::Listen { sender: Some(_) })
                && network.neighbors(v).iter().all(|&w| nbr_min[w].0 >= t[v])
                && nbr_min[v].0 >= t[v]
            {
                watched.push((v, t[v]));
            }
        }
        {
            let t_now = &t;
            let cache = &cache;
            let playing = &playing;
            let is_b = &is_b;
            radio.deliver(network, noise, s, &broadcasters, |w| !is_b[w], |w, sender| {
                let r = playing[sender];
                let own = t_now[w];
                if r != own || own > t_len {
                    return;
                }
                let listens = cache[w][own - 1].as_ref().is_some_and(|a| !a.is_broadcast());
                if listens {
                    if let Some(NodeAction::Broadcast(m)) = &cache[sender][r - 1] {
                        histories[w].record(r, Payload::clone(m));
                    }
                }
            });
        }
        advance(&mut t, &histories, &mut table, s);
        opportunities += watched.len() as u64;
        advances += watched.iter().filter(|&&(v, x)| t[v] > x).count() as u64;
    }

    let verified = verify_simulation(&truth.transcript, &histories);
    Ok(ProgressReport {
        histories,
        verified,
        final_t: t,
        rounds_used,
        budget,
        table,
        local_opportunities: opportunities,
        local_advances: advances,
    })
}

/// Backward-traced blaming chains over a completion table.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainStats {
    /// Per level `x`, the largest `D_{v,x} - max_{w in Γ²(v)} D_{w,x-1}`.
    pub max_increment: Vec<i64>,
    /// Smallest such increment per level.
    pub min_increment: Vec<i64>,
    /// The chain `(v_T, T), (v_{T-1}, T-1), ..., (v_1, 1)` behind the latest
    /// completion.
    pub longest: Vec<(NodeId, usize)>,
    pub longest_length: u64,
}

/// The predecessor of `(v, x)`: the node of `Γ²(v)` that finished round
/// `x - 1` last (smallest id on ties).
fn blame(table: &CompletionTable, ball: &[NodeId], x: usize) -> (NodeId, u64) {
    ball.iter()
        .map(|&w| (w, table.get(w, x - 1).expect("complete table")))
        .max_by_key(|&(w, d)| (d, std::cmp::Reverse(w)))
        .expect("balls contain their center")
}

pub fn measure_blaming_chains(table: &CompletionTable, network: &Network) -> Result<ChainStats> {
    if let Some(v) = (0..table.len()).find(|&v| (1..=table.length()).any(|x| table.get(v, x).is_none())) {
        return Err(Error::IncompleteTable { node: v });
    }
    let balls = network.two_hop_balls();
    let levels = table.length();
    let mut max_increment = vec![i64::MIN; levels];
    let mut min_increment = vec![i64::MAX; levels];
    for v in 0..table.len() {
        for x in 1..=levels {
            let (_, pred) = blame(table, &balls[v], x);
            let inc = table.get(v, x).unwrap() as i64 - pred as i64;
            max_increment[x - 1] = max_increment[x - 1].max(inc);
            min_increment[x - 1] = min_increment[x - 1].min(inc);
        }
    }
    let mut longest = Vec::new();
    let mut longest_length = 0;
    if levels > 0 {
        let mut v = (0..table.len())
            .max_by_key(|&v| (table.completion(v).unwrap(), std::cmp::Reverse(v)))
            .unwrap_or(0);
        longest_length = table.completion(v).unwrap_or(0);
        for x in (1..=levels).rev() {
            longest.push((v, x));
            v = blame(table, &balls[v], x).0;
        }
    }
    Ok(ChainStats {
        max_increment,
        min_increment,
        longest,
        longest_length,
    })
}

/// Outcome of re-checking the delay recurrence against the fault draws.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecurrenceCheck {
    pub checked: usize,
    /// Violations of `D_{v,x} <= max_{Γ²(receivers) ∪ Γ²(v)} D_{·,x-1} + Y`,
    /// with `Y` the wait until the first fault-free round of every target.
    pub violations: usize,
    /// Violations of the same bound taken over `Γ²(v)` only.
    pub literal_violations: usize,
}

fn first_clean_after(noise: &NoiseModel, v: NodeId, after: u64) -> u64 {
    let mut s = after + 1;
    while noise.faulted(v, s) {
        s += 1;
    }
    s
}

/// Re-derives, for every `(v, x)`, the latest moment by which `v` must have
/// completed round `x` given when its surroundings completed round `x - 1`.
///
/// Once every node within two hops of `v` and of each target has `t >= x`,
/// all of `Γ(v)` plays round `x` and each target hears its sender in the
/// first round its receiver fault coin is clean.
pub fn check_delay_recurrence(
    table: &CompletionTable,
    network: &Network,
    truth: &FaultlessRun,
    noise: &NoiseModel,
) -> Result<RecurrenceCheck> {
    if !table.is_complete() {
        let v = (0..table.len()).find(|&v| table.completion(v).is_none()).unwrap_or(0);
        return Err(Error::IncompleteTable { node: v });
    }
    let balls = network.two_hop_balls();
    let mut out = RecurrenceCheck::default();
    for v in 0..table.len() {
        for x in 1..=table.length() {
            let d = table.get(v, x).unwrap();
            let prev = |w: NodeId| table.get(w, x - 1).unwrap();
            let local = balls[v].iter().map(|&w| prev(w)).max().unwrap_or(0);
            let targets: Vec<NodeId> = match truth.role(v, x) {
                RoundRole::Listen { sender: None } => Vec::new(),
                RoundRole::Listen { sender: Some(_) } => vec![v],
                RoundRole::Broadcast { receivers } => receivers.clone(),
            };
            out.checked += 1;
            if targets.is_empty() {
                if d > local {
                    out.violations += 1;
                    out.literal_violations += 1;
                }
                continue;
            }
            let wide = targets
                .iter()
                .flat_map(|&w| balls[w].iter().copied())
                .map(prev)
                .max()
                .unwrap_or(0)
                .max(local);
            let bound = |m: u64| targets.iter().map(|&w| first_clean_after(noise, w, m)).max().unwrap();
            if d > bound(wide) {
                out.violations += 1;
            }
            if d > bound(local) {
                out.literal_violations += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{path, star};
    use crate::protocols::{star_flood_protocol, SourceFlood};

    #[test]
    fn faultless_lockstep() {
        let s = star(5).unwrap();
        let p = star_flood_protocol(&s, 6).unwrap();
        let r = simulate_with_progress_detection(&s, &p, &p.inputs(&s, 0), &NoiseModel::faultless(), 100, 64).unwrap();
        assert!(r.all_verified());
        assert_eq!(r.max_completion_round(), Some(6));
        let chains = measure_blaming_chains(&r.table, &s).unwrap();
        assert!(chains.max_increment.iter().all(|&i| i == 1));
        assert!(chains.min_increment.iter().all(|&i| i == 1));
        assert_eq!(chains.longest.len(), 6);
    }

    #[test]
    fn edge_completion_is_geometric() {
        let e = path(2).unwrap();
        let p = SourceFlood::new(0, 1);
        let inputs = p.inputs(&e, 0);
        let seeds = 10_000;
        let mut total = 0u64;
        for seed in 0..seeds {
            let noise = NoiseModel::new(0.5, seed).unwrap();
            let r = simulate_with_progress_detection(&e, &p, &inputs, &noise, 1_000, 64).unwrap();
            assert!(r.all_verified());
            total += r.table.completion(1).unwrap();
        }
        let mean = total as f64 / seeds as f64;
        assert!((1.90..=2.10).contains(&mean), "mean {mean}");
    }

    #[test]
    fn budget_exhaustion_is_partial() {
        let s = star(4).unwrap();
        let p = star_flood_protocol(&s, 8).unwrap();
        let noise = NoiseModel::new(0.5, 3).unwrap();
        let r = simulate_with_progress_detection(&s, &p, &p.inputs(&s, 0), &noise, 3, 64).unwrap();
        assert!(!r.finished());
        assert_eq!(r.rounds_used, 3);
        assert!(measure_blaming_chains(&r.table, &s).is_err());
    }

    #[test]
    fn directed_networks_are_rejected() {
        let d = crate::network::directed_bipartite(2).unwrap();
        let p = SourceFlood::new(0, 1);
        assert!(matches!(
            simulate_with_progress_detection(&d, &p, &p.inputs(&d, 0), &NoiseModel::faultless(), 10, 64),
            Err(Error::Directed(_))
        ));
    }

    #[test]
    fn hand_built_table() {
        // Path 0-1-2-3, two levels.
        let net = path(4).unwrap();
        let table = CompletionTable::from_rows(
            2,
            vec![
                vec![Some(1), Some(3)],
                vec![Some(2), Some(3)],
                vec![Some(1), Some(6)],
                vec![Some(4), Some(5)],
            ],
        );
        let chains = measure_blaming_chains(&table, &net).unwrap();
        // Node 2 at level 2: Γ² = {0,1,2,3}, latest level-1 finisher is node 3 at 4.
        assert_eq!(chains.longest, vec![(2, 2), (3, 1)]);
        assert_eq!(chains.longest_length, 6);
        assert_eq!(chains.max_increment, vec![4, 2]);
    }
}
