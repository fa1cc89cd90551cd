//! Property tests over random networks, protocols and seeds.

use nrs_core::analysis::gf256::{rank_of, RankTracker};
use nrs_core::analysis::oracle;
use nrs_core::analysis::stats::Summary;
use nrs_core::analysis::tail::{evaluate, sample_sums};
use nrs_core::model::step;
use nrs_core::network::{random_bounded, GraphSpec, Network};
use nrs_core::protocol::run;
use nrs_core::protocols::ProtocolSpec;
use nrs_core::runner::{run_cell, Cell, SimKind};
use nrs_core::sim_static::{check_search_invariants, learn_delays_oracle, most_delayed, Primitives};
use nrs_core::{NodeAction, NoiseModel, SimConstants};
use proptest::prelude::*;

fn small_graph() -> impl Strategy<Value = (Network, u64)> {
    (2usize..14, 1usize..5, any::<u64>()).prop_map(|(n, d, seed)| (random_bounded(n, d, seed).unwrap(), seed))
}

fn protocol_spec() -> impl Strategy<Value = ProtocolSpec> {
    (0usize..4, 1usize..10).prop_map(|(k, t)| match k {
        0 => ProtocolSpec::Flood(t),
        1 => ProtocolSpec::Silent(t),
        2 => ProtocolSpec::RoundRobin(t),
        _ => ProtocolSpec::Decay(t),
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn runs_are_deterministic((net, seed) in small_graph(), spec in protocol_spec(), p in 0.0f64..0.9) {
        let proto = spec.build(&net, seed).unwrap();
        let inputs = proto.inputs(&net, seed);
        let noise = NoiseModel::new(p, seed).unwrap();
        let a = run(&net, proto.as_ref(), &inputs, &noise, spec.length()).unwrap();
        let b = run(&net, proto.as_ref(), &inputs, &noise, spec.length()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn receive_rule_rederived_from_the_action_log((net, seed) in small_graph(), spec in protocol_spec(), p in 0.0f64..0.9) {
        let proto = spec.build(&net, seed).unwrap();
        let inputs = proto.inputs(&net, seed);
        let noise = NoiseModel::new(p, seed ^ 0x55).unwrap();
        let tr = run(&net, proto.as_ref(), &inputs, &noise, spec.length()).unwrap();
        for r in 1..=tr.len() {
            let log = tr.round(r);
            for v in net.nodes() {
                let senders: Vec<_> = net.in_neighbors(v).iter().filter(|&&u| log.actions[u].is_broadcast()).collect();
                let expect = (!log.actions[v].is_broadcast() && !log.faults[v] && senders.len() == 1)
                    .then(|| log.actions[*senders[0]].message().unwrap().clone());
                let got = tr.histories[v].events().iter().find(|e| e.round == r).map(|e| e.payload.clone());
                prop_assert_eq!(got, expect, "node {} round {}", v, r);
            }
        }
    }

    #[test]
    fn zero_noise_never_faults(seed in any::<u64>(), n in 1usize..64, round in any::<u64>()) {
        let z = NoiseModel::new(0.0, seed).unwrap();
        prop_assert!(z.fault_vector(n, round).iter().all(|f| !f));
    }

    #[test]
    fn collision_silence_and_fault_look_alike(k in 2usize..6) {
        // Node 0 listens to k in-neighbors.
        let edges: Vec<_> = (1..=k).map(|u| (0, u)).collect();
        let net = Network::from_edges(k + 1, &edges, false).unwrap();
        let mut all = vec![NodeAction::Broadcast(7u8); k + 1];
        all[0] = NodeAction::Listen;
        let mut none = vec![NodeAction::Listen; k + 1];
        let collision = step(&net, &all, &vec![false; k + 1]).unwrap()[0];
        let silence = step(&net, &none, &vec![false; k + 1]).unwrap()[0];
        none[1] = NodeAction::Broadcast(7u8);
        let mut faults = vec![false; k + 1];
        faults[0] = true;
        let fault = step(&net, &none, &faults).unwrap()[0];
        prop_assert_eq!(collision, None);
        prop_assert_eq!(silence, None);
        prop_assert_eq!(fault, None);
    }

    #[test]
    fn noiseless_simulation_is_exact(n in 3usize..10, d in 1usize..4, seed in any::<u64>(), spec in protocol_spec()) {
        for sim in SimKind::ALL {
            let out = run_cell(&Cell {
                graph: GraphSpec::RandomBounded { n, delta: d },
                protocol: spec,
                sim,
                p: 0.0,
                seed,
                consts: SimConstants::default(),
                oracle: false,
            }).unwrap();
            prop_assert!(out.verified && out.finished, "{} failed", sim);
        }
    }

    #[test]
    fn oracle_search_is_exact_for_most_delayed_nodes((net, seed) in small_graph(), width in 1usize..40) {
        let lo = 100;
        let hi = lo + width;
        let t: Vec<usize> = net.nodes().map(|v| lo + ((seed >> (v % 60)) as usize + 7 * v) % (width + 1)).collect();
        let (m, trace) = learn_delays_oracle(&net, &t, lo, hi).unwrap();
        prop_assert!(check_search_invariants(&net, &t, &trace).is_ok());
        for v in most_delayed(&net, &t) {
            for &w in net.neighbors(v).iter().chain([v].iter()) {
                prop_assert_eq!(m[w], t[v]);
            }
        }
    }

    #[test]
    fn oracle_distance_labels_match_bfs((net, seed) in small_graph()) {
        let active: Vec<bool> = net.nodes().map(|v| (seed >> (v % 64)) & 1 == 1).collect();
        let noise = NoiseModel::faultless();
        let mut prim = Primitives::new(&net, &noise, SimConstants::default(), true);
        let labels = prim.dist_to_active(&active);
        for v in net.nodes() {
            let d = net.distances_from(v);
            let nearest = net.nodes().filter(|&u| active[u]).filter_map(|u| d[u]).min();
            let want = match nearest {
                Some(0) => "=0",
                Some(1) => "=1",
                Some(2) => "=2",
                _ => ">2",
            };
            prop_assert_eq!(labels[v].label(), want);
        }
    }

    #[test]
    fn exceedance_is_non_increasing_in_t(seed in any::<u64>(), c in 0.5f64..4.0, mut grid in prop::collection::vec(0.0f64..10.0, 1..8)) {
        grid.sort_by(f64::total_cmp);
        let sums = sample_sums(3, 4, 0.5, 500, seed).unwrap();
        let s = evaluate(&sums, 3, 4, 0.5, c, &grid);
        prop_assert!(s.exceedance.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rank_tracker_agrees_with_elimination(rows in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0u8), any::<u8>()], 5), 0..9)) {
        let mut t = RankTracker::new(5);
        for (i, r) in rows.iter().enumerate() {
            t.insert(r);
            prop_assert_eq!(t.rank(), rank_of(&rows[..=i]));
        }
    }

    #[test]
    fn max_geometric_moments_grow_with_delta(d in 1usize..200, q in 0.05f64..1.0) {
        prop_assert!(oracle::expected_max_geometric(d + 1, q) >= oracle::expected_max_geometric(d, q) - 1e-12);
        let cdf: Vec<f64> = (0..30).map(|k| oracle::max_geometric_cdf(d, q, k)).collect();
        prop_assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn summary_order(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let s = Summary::of(&xs);
        prop_assert!(s.min <= s.p50 && s.p50 <= s.p95 && s.p95 <= s.max);
        prop_assert!(s.min <= s.mean + 1e-6 && s.mean <= s.max + 1e-6);
    }

    #[test]
    fn edge_list_round_trip((net, _) in small_graph()) {
        let mut buf = Vec::new();
        net.write_edge_list(&mut buf).unwrap();
        let back = Network::read_edge_list(&buf[..]).unwrap();
        prop_assert_eq!(back.edges(), net.edges());
        prop_assert_eq!(back.len(), net.len());
    }
}
