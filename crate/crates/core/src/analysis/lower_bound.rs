//! Lower-bound experiments on stars and on the complete bipartite digraph:
//! non-coding repetition against random linear coding.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gf256::RankTracker;
use super::oracle;
use super::stats::Summary;
use crate::config::SimConstants;
use crate::error::Result;
use crate::model::{NoiseModel, Radio};
use crate::network::{self, Network};
use crate::runner::{run_cell, Cell, SimKind};
use crate::protocols::ProtocolSpec;
use crate::NodeId;

/// Broadcasts from `sender` in consecutive rounds, starting at `*round`,
/// until every node in `targets` has heard it. Returns the number of rounds.
fn repeat_until_all(net: &Network, noise: &NoiseModel, radio: &mut Radio, round: &mut u64, sender: NodeId, targets: &mut [bool], missing: usize) -> u64 {
    let mut missing = missing;
    let start = *round;
    let mut heard = Vec::new();
    while missing > 0 {
        *round += 1;
        radio.deliver(net, noise, *round, &[sender], |w| !targets[w], |w, _| heard.push(w));
        for w in heard.drain(..) {
            targets[w] = true;
            missing -= 1;
        }
    }
    *round - start
}

/// Per-seed totals of the repetition strategy on a star: the center sends
/// each of the `t_len` messages until every leaf holds it.
pub fn star_repetition_rounds(delta: usize, t_len: usize, p: f64, seeds: &[u64]) -> Result<Vec<u64>> {
    let net = network::star(delta)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let noise = NoiseModel::new(p, seed)?;
            let mut radio = Radio::new(net.len());
            let mut round = 0;
            for _ in 0..t_len {
                let mut has = vec![false; net.len()];
                has[0] = true;
                repeat_until_all(&net, &noise, &mut radio, &mut round, 0, &mut has, delta);
            }
            Ok(round)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedRun {
    pub rounds: u64,
    /// Receptions that did not raise a leaf's rank, summed over leaves.
    pub redundant: u64,
}

/// Rateless random linear coding over GF(256) on a star: every round the
/// center broadcasts a fresh uniform combination of the `t_len` messages and
/// a leaf is done once its received coefficient vectors have rank `t_len`.
///
/// The center is the only sender, so a leaf hears round `r` iff it is not
/// faulted in `r`, and leaves never interact. Each leaf is therefore run to
/// completion on its own against the shared coefficient stream, which keeps
/// one basis in cache at a time.
pub fn star_coded_rounds(delta: usize, t_len: usize, p: f64, seeds: &[u64]) -> Result<Vec<CodedRun>> {
    assert!(t_len >= 1);
    let net = network::star(delta)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let noise = NoiseModel::new(p, seed)?;
            let mut coeffs = ChaCha8Rng::seed_from_u64(seed);
            let mut stream: Vec<Vec<u8>> = Vec::new();
            let mut rounds = 0u64;
            let mut redundant = 0u64;
            for leaf in net.neighbors(0).iter().copied() {
                let mut tracker = RankTracker::new(t_len);
                let mut r = 0u64;
                while !tracker.is_full() {
                    r += 1;
                    if stream.len() < r as usize {
                        let mut row = vec![0u8; t_len];
                        coeffs.fill_bytes(&mut row);
                        stream.push(row);
                    }
                    if !noise.faulted(leaf, r) && !tracker.insert(&stream[r as usize - 1]) {
                        redundant += 1;
                    }
                }
                rounds = rounds.max(r);
            }
            Ok(CodedRun { rounds, redundant })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteRun {
    pub total: u64,
    pub per_sender: Vec<u64>,
}

/// Complete bipartite digraph with `delta` senders: one sender at a time
/// repeats its message until all receivers hold it.
pub fn directed_bipartite_experiment(delta: usize, p: f64, seeds: &[u64]) -> Result<Vec<BipartiteRun>> {
    let net = network::directed_bipartite(delta)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let noise = NoiseModel::new(p, seed)?;
            let mut radio = Radio::new(net.len());
            let mut round = 0;
            let per_sender = (0..delta)
                .map(|l| {
                    let mut has = vec![false; net.len()];
                    has[..delta].fill(true);
                    repeat_until_all(&net, &noise, &mut radio, &mut round, l, &mut has, delta)
                })
                .collect();
            Ok(BipartiteRun { total: round, per_sender })
        })
        .collect()
}

/// Repetition against coding at one grid point.
#[derive(Clone, Debug)]
pub struct GapReport {
    pub delta: usize,
    pub p: f64,
    pub repetition_t: usize,
    pub coded_t: usize,
    pub repetition: Summary,
    pub coded: Summary,
    /// Exact expected repetition rounds per message.
    pub oracle_per_message: f64,
}

impl GapReport {
    pub fn repetition_per_t(&self) -> f64 {
        self.repetition.mean / self.repetition_t as f64
    }

    pub fn coded_per_t(&self) -> f64 {
        self.coded.mean / self.coded_t as f64
    }

    /// Relative deviation of the repetition mean from the exact expectation.
    pub fn oracle_error(&self) -> f64 {
        (self.repetition_per_t() - self.oracle_per_message).abs() / self.oracle_per_message
    }

    /// `(repetition - coded)` per message in units of the combined standard
    /// error.
    pub fn margin_sigmas(&self) -> f64 {
        let se_r = self.repetition.sem() / self.repetition_t as f64;
        let se_c = self.coded.sem() / self.coded_t as f64;
        let se = (se_r * se_r + se_c * se_c).sqrt();
        if se == 0.0 {
            return f64::INFINITY;
        }
        (self.repetition_per_t() - self.coded_per_t()) / se
    }

    pub fn summary_line(&self) -> String {
        format!(
            "gap delta={} p={}: repetition {:.4}/T (oracle {:.4}, T={}), coded {:.4}/T (T={}), margin {:.1} sigma",
            self.delta,
            self.p,
            self.repetition_per_t(),
            self.oracle_per_message,
            self.repetition_t,
            self.coded_per_t(),
            self.coded_t,
            self.margin_sigmas()
        )
    }
}

impl GapReport {
    pub fn from_runs(delta: usize, p: f64, repetition_t: usize, repetition: &[u64], coded_t: usize, coded: &[u64]) -> Self {
        Self {
            delta,
            p,
            repetition_t,
            coded_t,
            repetition: Summary::of_counts(repetition),
            coded: Summary::of_counts(coded),
            oracle_per_message: oracle::expected_max_geometric(delta, 1.0 - p),
        }
    }
}

pub fn gap_report(delta: usize, p: f64, repetition_t: usize, repetition_seeds: &[u64], coded_t: usize, coded_seeds: &[u64]) -> Result<GapReport> {
    let rep = star_repetition_rounds(delta, repetition_t, p, repetition_seeds)?;
    let coded: Vec<u64> = star_coded_rounds(delta, coded_t, p, coded_seeds)?.into_iter().map(|c| c.rounds).collect();
    Ok(GapReport::from_runs(delta, p, repetition_t, &rep, coded_t, &coded))
}

/// Overhead of each simulator on one candidate hard bipartite instance.
#[derive(Clone, Debug)]
pub struct HardInstanceRow {
    pub sim: SimKind,
    pub t_len: usize,
    pub rounds: Summary,
    pub verified_rate: f64,
}

impl HardInstanceRow {
    pub fn per_t(&self) -> f64 {
        self.rounds.mean / self.t_len as f64
    }
}

/// Runs every simulator on `bipartite_hard(n, delta)` with the collision-free
/// round-robin protocol. No bound is asserted.
pub fn hard_instance_experiment(n: usize, delta: usize, t_len: usize, p: f64, seeds: &[u64], consts: &SimConstants) -> Result<Vec<HardInstanceRow>> {
    SimKind::ALL
        .iter()
        .map(|&sim| {
            let outs = seeds
                .par_iter()
                .map(|&seed| {
                    run_cell(&Cell {
                        graph: network::GraphSpec::BipartiteHard { n, delta },
                        protocol: ProtocolSpec::RoundRobin(t_len),
                        sim,
                        p,
                        seed,
                        consts: *consts,
                        oracle: false,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let rounds: Vec<u64> = outs.iter().map(|o| o.rounds).collect();
            let ok = outs.iter().filter(|o| o.verified).count();
            Ok(HardInstanceRow {
                sim,
                t_len,
                rounds: Summary::of_counts(&rounds),
                verified_rate: ok as f64 / seeds.len() as f64,
            })
        })
        .collect()
}
