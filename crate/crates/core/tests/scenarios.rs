//! Worked scenarios for the simulators and their primitives, checked against
//! exact probabilities where those are available.

use nrs_core::analysis::oracle::binomial_sigma;
use nrs_core::config::{lg, logloglog};
use nrs_core::network::{path, star};
use nrs_core::protocol::FaultlessRun;
use nrs_core::protocols::ProtocolSpec;
use nrs_core::runner::{run_cell, Cell, SimKind};
use nrs_core::sim_general::{share_knowledge, Sharing};
use nrs_core::sim_progress::{check_delay_recurrence, measure_blaming_chains};
use nrs_core::sim_static::{broadcast_decay, Primitives};
use nrs_core::{sim_progress, sim_static, GraphSpec, NoiseModel, SimConstants};

const TRIALS: u64 = 10_000;

fn cell(graph: &str, protocol: &str, sim: SimKind, p: f64, seed: u64) -> Cell {
    Cell {
        graph: graph.parse().unwrap(),
        protocol: protocol.parse().unwrap(),
        sim,
        p,
        seed,
        consts: SimConstants::default(),
        oracle: false,
    }
}

fn verified_count(graph: &str, protocol: &str, sim: SimKind, p: f64, seeds: u64) -> u64 {
    (1..=seeds)
        .filter(|&s| run_cell(&cell(graph, protocol, sim, p, s)).unwrap().verified)
        .count() as u64
}

fn mean_rounds(graph: &str, protocol: &str, sim: SimKind, p: f64, seeds: u64) -> f64 {
    let total: u64 = (1..=seeds)
        .map(|s| {
            let o = run_cell(&cell(graph, protocol, sim, p, s)).unwrap();
            assert!(o.finished && o.verified, "{graph} {protocol} seed {s}");
            o.rounds
        })
        .sum();
    total as f64 / seeds as f64
}

fn decay_trials(net: &nrs_core::Network, senders: &[usize], listener: usize, p: f64, consts: SimConstants) -> f64 {
    let hits = (1..=TRIALS)
        .filter(|&k| {
            let noise = NoiseModel::new(p, k).unwrap();
            let mut prim = Primitives::new(net, &noise, consts, false);
            let msgs: Vec<Option<u8>> = net.nodes().map(|v| senders.contains(&v).then_some(1)).collect();
            broadcast_decay(&mut prim, &msgs)[listener].is_some()
        })
        .count();
    hits as f64 / TRIALS as f64
}

/// Probability that a listener with `senders` informed neighbors hears one of
/// them at least once during a Decay broadcast.
fn decay_exact(senders: usize, delta: usize, n: usize, p: f64, consts: &SimConstants) -> f64 {
    let inner = lg(delta);
    let outer = consts.c3 * lg(delta) * logloglog(n);
    let miss: f64 = (1..=inner)
        .map(|i| {
            let q = 0.5f64.powi(i as i32);
            let s = senders as f64 * q * (1.0 - q).powi(senders as i32 - 1) * (1.0 - p);
            1.0 - s
        })
        .product();
    1.0 - miss.powi(outer as i32)
}

fn within(freq: f64, exact: f64) -> bool {
    (freq - exact).abs() <= 4.0 * binomial_sigma(exact, TRIALS as usize) + 1e-12
}

#[test]
fn static_noiseless_star_verifies() {
    assert_eq!(verified_count("star:4", "flood:16", SimKind::Static, 0.0, 1), 1);
    let mut c = cell("star:4", "flood:8", SimKind::Static, 0.0, 1);
    c.oracle = true;
    assert!(run_cell(&c).unwrap().verified);
}

#[test]
fn static_noisy_star_verifies_whp() {
    let ok = verified_count("star:8", "flood:32", SimKind::Static, 0.3, 100);
    assert!(ok >= 99, "{ok}/100");
}

#[test]
fn static_window_stays_within_q() {
    let consts = SimConstants::default();
    for seed in 1..=50 {
        let net = "random:32:4".parse::<GraphSpec>().unwrap().build(seed).unwrap();
        let proto = "flood:16".parse::<ProtocolSpec>().unwrap().build(&net, seed).unwrap();
        let inputs = proto.inputs(&net, seed);
        let noise = NoiseModel::new(0.3, seed).unwrap();
        let r = sim_static::run(&net, proto, &inputs, &noise, &consts, false).unwrap();
        assert_eq!(r.window_violations, 0, "seed {seed}: spread {} > {}", r.max_window_spread, r.window);
        assert!(r.max_window_spread <= r.window);
    }
}

#[test]
fn edge_decay_matches_the_exact_bernoulli_value() {
    let e = path(2).unwrap();
    let consts = SimConstants::default();
    let exact = decay_exact(1, 1, 2, 0.0, &consts);
    let freq = decay_trials(&e, &[0], 1, 0.0, consts);
    assert!(within(freq, exact), "freq {freq}, exact {exact}");
    let boosted = SimConstants { c3: 8, ..consts };
    assert!(decay_exact(1, 1, 2, 0.0, &boosted) >= 0.99);
}

#[test]
fn eight_leaves_reach_the_center() {
    let s = star(32).unwrap();
    let consts = SimConstants::default();
    let senders: Vec<usize> = (1..=8).collect();
    let exact = decay_exact(8, 32, 33, 0.5, &consts);
    let freq = decay_trials(&s, &senders, 0, 0.5, consts);
    assert!(freq >= 0.9, "{freq}");
    assert!(within(freq, exact), "freq {freq}, exact {exact}");
}

#[test]
fn edge_sharing_matches_the_exact_bernoulli_value() {
    let e = path(2).unwrap();
    let consts = SimConstants::default();
    let rounds = consts.share_rounds(1) as i32;
    let one_way = 1.0 - 0.75f64.powi(rounds);
    let both = 1.0 - 2.0 * 0.75f64.powi(rounds) + 0.5f64.powi(rounds);
    let (mut fwd, mut back, mut joint) = (0u64, 0u64, 0u64);
    for k in 1..=TRIALS {
        let noise = NoiseModel::new(0.0, k).unwrap();
        let mut sharing = Sharing::new(&e, &noise, &consts, false);
        let heard = share_knowledge(&mut sharing, &[Some(0u8), Some(1u8)]);
        let (a, b) = (!heard[1].is_empty(), !heard[0].is_empty());
        fwd += u64::from(a);
        back += u64::from(b);
        joint += u64::from(a && b);
    }
    let f = |x: u64| x as f64 / TRIALS as f64;
    assert!(one_way >= 0.75);
    assert!(within(f(fwd), one_way), "{} vs {one_way}", f(fwd));
    assert!(within(f(back), one_way), "{} vs {one_way}", f(back));
    assert!(within(f(joint), both), "{} vs {both}", f(joint));
}

#[test]
fn star_center_hears_all_sixteen_leaves() {
    let s = star(16).unwrap();
    let consts = SimConstants::default();
    let all: Vec<Option<usize>> = s.nodes().map(Some).collect();
    let hits = (1..=TRIALS)
        .filter(|&k| {
            let noise = NoiseModel::new(0.5, k).unwrap();
            let mut sharing = Sharing::new(&s, &noise, &consts, false);
            share_knowledge(&mut sharing, &all)[0].len() == 16
        })
        .count();
    let freq = hits as f64 / TRIALS as f64;
    assert!(freq >= 0.75, "{freq}");
}

#[test]
fn general_silent_path_verifies_whp() {
    let ok = verified_count("path:8", "silent:4", SimKind::General, 0.3, 100);
    assert!(ok >= 99, "{ok}/100");
}

#[test]
fn general_overhead_tracks_delta_log_delta() {
    let deltas = [4usize, 8, 16, 32];
    let means: Vec<f64> = deltas
        .iter()
        .map(|d| mean_rounds(&format!("star:{d}"), "flood:64", SimKind::General, 0.3, 3))
        .collect();
    for w in means.windows(2) {
        assert!(w[1] > 2.0 * w[0], "{means:?}");
    }
    let norm: Vec<f64> = deltas
        .iter()
        .zip(&means)
        .map(|(&d, &m)| m / (64 * d * lg(d)) as f64)
        .collect();
    let (lo, hi) = norm.iter().fold((f64::MAX, 0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi <= 2.0 * lo, "{norm:?}");
}

#[test]
fn progress_overhead_grows_like_log_delta() {
    let small = mean_rounds("star:16", "flood:64", SimKind::Progress, 0.5, 100) / 64.0;
    assert!(small <= 2.0 * lg(16) as f64, "{small}");
    let a = mean_rounds("star:16", "flood:256", SimKind::Progress, 0.5, 20);
    let b = mean_rounds("star:256", "flood:256", SimKind::Progress, 0.5, 20);
    assert!(b / a <= 2.5, "{}", b / a);
}

#[test]
fn noiseless_chain_increments_are_one() {
    let net = "random:16:4".parse::<GraphSpec>().unwrap().build(3).unwrap();
    let proto = "flood:16".parse::<ProtocolSpec>().unwrap().build(&net, 3).unwrap();
    let inputs = proto.inputs(&net, 3);
    let r = sim_progress::run(&net, proto.as_ref(), &inputs, &NoiseModel::faultless(), &SimConstants::default()).unwrap();
    let chains = measure_blaming_chains(&r.table, &net).unwrap();
    assert!(chains.max_increment.iter().all(|&d| d == 1), "{chains:?}");
    assert_eq!(chains.longest_length, 16);
    // Nodes with nothing to hear may run ahead; the chain itself is lockstep.
    for (&(v, x), &(w, _)) in chains.longest.iter().zip(&chains.longest[1..]) {
        assert_eq!(r.table.get(v, x).unwrap(), r.table.get(w, x - 1).unwrap() + 1);
    }
}

#[test]
fn delay_recurrence_holds_under_noise() {
    let consts = SimConstants::default();
    for seed in 1..=100 {
        let net = "random:16:4".parse::<GraphSpec>().unwrap().build(seed).unwrap();
        let proto = "round-robin:32".parse::<ProtocolSpec>().unwrap().build(&net, seed).unwrap();
        let inputs = proto.inputs(&net, seed);
        let noise = NoiseModel::new(0.5, seed).unwrap();
        let r = sim_progress::run(&net, proto.as_ref(), &inputs, &noise, &consts).unwrap();
        let truth = FaultlessRun::new(&net, proto.as_ref(), &inputs).unwrap();
        let check = check_delay_recurrence(&r.table, &net, &truth, &noise).unwrap();
        assert!(check.checked > 0);
        assert_eq!(check.violations, 0, "seed {seed}");
    }
}
