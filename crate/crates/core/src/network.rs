//! Topologies and the generators used by the experiments.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::NodeId;

/// Structural metadata retained from the generator, used by the protocols
/// that only make sense on one family of graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Node ids `0..n` are the left side, `n..2n` the right side. Left groups
    /// are contiguous blocks of `n / groups` ids.
    Bipartite { side: usize, groups: usize },
    /// Left ids `0..delta`, right ids `delta..2*delta`, all arcs left to right.
    DirectedBipartite { delta: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    n: usize,
    directed: bool,
    out: Vec<Vec<NodeId>>,
    inn: Vec<Vec<NodeId>>,
    max_degree: usize,
    layout: Option<Layout>,
}

impl Network {
    /// Builds a network from an edge list. Duplicate edges are merged;
    /// self-loops and out-of-range ids are rejected.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)], directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("a network needs at least one node"));
        }
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::param(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::param(format!("self-loop at node {u}")));
            }
            out[u].push(v);
            inn[v].push(u);
            if !directed {
                out[v].push(u);
                inn[u].push(v);
            }
        }
        for list in out.iter_mut().chain(inn.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let max_degree = out.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            n,
            directed,
            out,
            inn,
            max_degree,
            layout: None,
        })
    }

    fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = Some(layout);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// True maximum out-degree.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Degree bound as used in loop-length formulas (never below one).
    pub fn delta(&self) -> usize {
        self.max_degree.max(1)
    }

    pub fn layout(&self) -> Option<&Layout> {
        self.layout.as_ref()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.n
    }

    /// Nodes that hear `v` when it broadcasts.
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out[v]
    }

    /// Nodes `v` can hear.
    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.inn[v]
    }

    /// Neighbors in an undirected network.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out[v]
    }

    pub fn edge_count(&self) -> usize {
        let arcs: usize = self.out.iter().map(Vec::len).sum();
        if self.directed {
            arcs
        } else {
            arcs / 2
        }
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.out[u].binary_search(&v).is_ok()
    }

    /// Arcs `(u, v)`; undirected edges are listed once with `u < v`.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut e = Vec::with_capacity(self.edge_count());
        for u in self.nodes() {
            for &v in &self.out[u] {
                if self.directed || u < v {
                    e.push((u, v));
                }
            }
        }
        e
    }

    /// Hop distances from `v` (following out-arcs), `None` when unreachable.
    pub fn distances_from(&self, v: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[v] = Some(0);
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &w in &self.out[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// The closed `k`-hop neighborhood of `v`, sorted, `v` included.
    pub fn ball(&self, v: NodeId, k: usize) -> Vec<NodeId> {
        let mut seen = vec![false; self.n];
        let mut frontier = vec![v];
        seen[v] = true;
        let mut all = vec![v];
        for _ in 0..k {
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in &self.out[u] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                        all.push(w);
                    }
                }
            }
            frontier = next;
        }
        all.sort_unstable();
        all
    }

    /// Closed 2-hop neighborhoods of every node.
    pub fn two_hop_balls(&self) -> Vec<Vec<NodeId>> {
        self.nodes().map(|v| self.ball(v, 2)).collect()
    }

    /// Center of a star (one node adjacent to every other node, no other edges).
    pub fn star_center(&self) -> Option<NodeId> {
        if self.directed || self.n < 2 || self.edge_count() != self.n - 1 {
            return None;
        }
        self.nodes().find(|&v| self.out[v].len() == self.n - 1)
    }

    /// Writes the text edge-list format: `n m directed` then one `u v` per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        let edges = self.edges();
        writeln!(w, "{} {} {}", self.n, edges.len(), u8::from(self.directed))?;
        for (u, v) in edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse = |s: &str, line: usize| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("expected an integer, found {s:?}"),
            })
        };
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: 1,
                message: "header must be `n m directed`".into(),
            });
        }
        let n = parse(fields[0], 1)?;
        let m = parse(fields[1], 1)?;
        let directed = match fields[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("directed flag must be 0 or 1, found {other:?}"),
                })
            }
        };
        let mut edges = Vec::with_capacity(m);
        for (idx, line) in lines {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "edge lines must be `u v`".into(),
                });
            }
            edges.push((parse(f[0], idx + 1)?, parse(f[1], idx + 1)?));
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: 1,
                message: format!("header announces {m} edges, found {}", edges.len()),
            });
        }
        Network::from_edges(n, &edges, directed)
    }
}

/// A graph family with its parameters but without a seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphSpec {
    Star { delta: usize },
    Path { n: usize },
    Cycle { n: usize },
    RandomBounded { n: usize, delta: usize },
    BipartiteHard { n: usize, delta: usize },
    DirectedBipartite { delta: usize },
}

impl GraphSpec {
    /// Whether the topology depends on the seed.
    pub fn is_random(&self) -> bool {
        matches!(self, GraphSpec::RandomBounded { .. } | GraphSpec::BipartiteHard { .. })
    }

    pub fn build(&self, seed: u64) -> Result<Network> {
        make_graph(*self, seed)
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Star { delta } => write!(f, "star:{delta}"),
            GraphSpec::Path { n } => write!(f, "path:{n}"),
            GraphSpec::Cycle { n } => write!(f, "cycle:{n}"),
            GraphSpec::RandomBounded { n, delta } => write!(f, "random:{n}:{delta}"),
            GraphSpec::BipartiteHard { n, delta } => write!(f, "hard:{n}:{delta}"),
            GraphSpec::DirectedBipartite { delta } => write!(f, "dibip:{delta}"),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| Error::config(format!("graph spec {s:?} is missing a parameter")))?
                .parse()
                .map_err(|_| Error::config(format!("graph spec {s:?} has a non-integer parameter")))
        };
        let spec = match parts[0] {
            "star" => GraphSpec::Star { delta: num(1)? },
            "path" => GraphSpec::Path { n: num(1)? },
            "cycle" => GraphSpec::Cycle { n: num(1)? },
            "random" => GraphSpec::RandomBounded {
                n: num(1)?,
                delta: num(2)?,
            },
            "hard" => GraphSpec::BipartiteHard {
                n: num(1)?,
                delta: num(2)?,
            },
            "dibip" => GraphSpec::DirectedBipartite { delta: num(1)? },
            other => return Err(Error::config(format!("unknown graph family {other:?}"))),
        };
        let expected = match spec {
            GraphSpec::RandomBounded { .. } | GraphSpec::BipartiteHard { .. } => 3,
            _ => 2,
        };
        if parts.len() != expected {
            return Err(Error::config(format!("graph spec {s:?} has the wrong number of parameters")));
        }
        Ok(spec)
    }
}

/// Instantiates a graph family. The seed only matters for the random families.
pub fn make_graph(spec: GraphSpec, seed: u64) -> Result<Network> {
    match spec {
        GraphSpec::Star { delta } => star(delta),
        GraphSpec::Path { n } => path(n),
        GraphSpec::Cycle { n } => cycle(n),
        GraphSpec::RandomBounded { n, delta } => random_bounded(n, delta, seed),
        GraphSpec::BipartiteHard { n, delta } => bipartite_hard(n, delta, seed),
        GraphSpec::DirectedBipartite { delta } => directed_bipartite(delta),
    }
}

/// Center `0`, leaves `1..=delta`.
pub fn star(delta: usize) -> Result<Network> {
    if delta == 0 {
        return Err(Error::param("star needs delta >= 1"));
    }
    let edges: Vec<_> = (1..=delta).map(|l| (0, l)).collect();
    Network::from_edges(delta + 1, &edges, false)
}

pub fn path(n: usize) -> Result<Network> {
    if n == 0 {
        return Err(Error::param("path needs n >= 1"));
    }
    let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    Network::from_edges(n, &edges, false)
}

pub fn cycle(n: usize) -> Result<Network> {
    if n < 3 {
        return Err(Error::param("cycle needs n >= 3"));
    }
    let mut edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    edges.push((n - 1, 0));
    Network::from_edges(n, &edges, false)
}

/// Random graph with maximum degree at most `delta`: a degree-capped random
/// spanning tree (connected whenever `delta >= 2`) plus random extra edges.
pub fn random_bounded(n: usize, delta: usize, seed: u64) -> Result<Network> {
    if n == 0 || delta == 0 {
        return Err(Error::param("random_bounded needs n >= 1 and delta >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut degree = vec![0usize; n];
    let mut adjacent = std::collections::HashSet::new();
    let mut edges = Vec::new();
    let mut add = |u: NodeId, v: NodeId, degree: &mut Vec<usize>, edges: &mut Vec<(NodeId, NodeId)>| {
        let key = (u.min(v), u.max(v));
        if u != v && degree[u] < delta && degree[v] < delta && adjacent.insert(key) {
            degree[u] += 1;
            degree[v] += 1;
            edges.push(key);
            true
        } else {
            false
        }
    };
    if delta == 1 {
        for pair in order.chunks(2) {
            if let [u, v] = pair {
                add(*u, *v, &mut degree, &mut edges);
            }
        }
    } else {
        for i in 1..n {
            let open: Vec<NodeId> = order[..i].iter().copied().filter(|&u| degree[u] < delta).collect();
            let parent = open[rng.gen_range(0..open.len())];
            add(order[i], parent, &mut degree, &mut edges);
        }
        let attempts = n * delta;
        for _ in 0..attempts {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            add(u, v, &mut degree, &mut edges);
        }
    }
    Network::from_edges(n, &edges, false)
}

/// The candidate hard bipartite instance: `|L| = |R| = n`, `L` split into
/// `delta` contiguous groups; iteration `t` draws a fresh permutation of `R`,
/// cuts it into `delta` blocks and joins the `t`-th node of group `i` to
/// block `i`.
pub fn bipartite_hard(n: usize, delta: usize, seed: u64) -> Result<Network> {
    if delta == 0 || n == 0 {
        return Err(Error::param("bipartite_hard needs n >= 1 and delta >= 1"));
    }
    if !n.is_multiple_of(delta) {
        return Err(Error::param(format!("bipartite_hard needs delta | n, got n = {n}, delta = {delta}")));
    }
    let block = n / delta;
    if block < delta {
        return Err(Error::param(format!(
            "bipartite_hard needs n / delta >= delta so every iteration has a node per group (n = {n}, delta = {delta})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * delta);
    for t in 0..delta {
        let mut perm: Vec<NodeId> = (0..n).collect();
        perm.shuffle(&mut rng);
        for i in 0..delta {
            let l = hard_left_node(n, delta, i, t);
            for &r in &perm[i * block..(i + 1) * block] {
                edges.push((l, n + r));
            }
        }
    }
    Ok(Network::from_edges(2 * n, &edges, false)?.with_layout(Layout::Bipartite { side: n, groups: delta }))
}

/// Id of the `t`-th node (0-based) of left group `i` (0-based).
pub fn hard_left_node(n: usize, groups: usize, i: usize, t: usize) -> NodeId {
    i * (n / groups) + t
}

/// Complete bipartite digraph with `delta` senders and `delta` receivers.
pub fn directed_bipartite(delta: usize) -> Result<Network> {
    if delta == 0 {
        return Err(Error::param("directed_bipartite needs delta >= 1"));
    }
    let mut edges = Vec::with_capacity(delta * delta);
    for l in 0..delta {
        for r in 0..delta {
            edges.push((l, delta + r));
        }
    }
    Ok(Network::from_edges(2 * delta, &edges, true)?.with_layout(Layout::DirectedBipartite { delta }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(net: &Network) {
        for v in net.nodes() {
            assert!(!net.out_neighbors(v).contains(&v));
            if !net.is_directed() {
                for &w in net.neighbors(v) {
                    assert!(net.has_edge(w, v), "asymmetric edge {v}-{w}");
                }
            }
        }
        let true_max = net.nodes().map(|v| net.out_neighbors(v).len()).max().unwrap();
        assert_eq!(net.max_degree(), true_max);
    }

    #[test]
    fn star_shape() {
        let s = star(3).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.neighbors(0).len(), 3);
        assert_eq!(s.max_degree(), 3);
        assert_eq!(s.star_center(), Some(0));
        check_invariants(&s);
    }

    #[test]
    fn path_and_cycle() {
        let p = path(5).unwrap();
        assert_eq!(p.edge_count(), 4);
        assert_eq!(p.max_degree(), 2);
        assert_eq!(p.star_center(), None);
        let c = cycle(6).unwrap();
        assert_eq!(c.edge_count(), 6);
        assert!(c.nodes().all(|v| c.neighbors(v).len() == 2));
        assert!(cycle(2).is_err());
        let single = path(1).unwrap();
        assert_eq!(single.max_degree(), 0);
        assert_eq!(single.delta(), 1);
    }

    #[test]
    fn hard_instance_matches_construction() {
        let g = bipartite_hard(9, 3, 11).unwrap();
        assert_eq!(g.len(), 18);
        check_invariants(&g);
        for l in 0..9 {
            assert_eq!(g.neighbors(l).len(), 3, "left node {l}");
            assert!(g.neighbors(l).iter().all(|&r| r >= 9));
        }
        for r in 9..18 {
            assert_eq!(g.neighbors(r).len(), 3, "right node {r}");
        }
        // In iteration t the blocks of l_t^1..l_t^3 partition R.
        for t in 0..3 {
            let mut covered: Vec<NodeId> = (0..3)
                .flat_map(|i| g.neighbors(hard_left_node(9, 3, i, t)).to_vec())
                .collect();
            covered.sort_unstable();
            assert_eq!(covered, (9..18).collect::<Vec<_>>());
        }
        assert!(bipartite_hard(10, 3, 0).is_err());
        assert!(bipartite_hard(8, 4, 0).is_err());
    }

    #[test]
    fn directed_bipartite_arcs() {
        let g = directed_bipartite(4).unwrap();
        assert_eq!(g.edge_count(), 16);
        assert!(g.edges().iter().all(|&(u, v)| u < 4 && v >= 4));
        assert!(g.out_neighbors(5).is_empty());
        assert_eq!(g.in_neighbors(5).len(), 4);
    }

    #[test]
    fn random_bounded_respects_degree_and_connects() {
        for seed in 0..20 {
            let g = random_bounded(32, 4, seed).unwrap();
            check_invariants(&g);
            assert!(g.max_degree() <= 4);
            assert!(g.distances_from(0).iter().all(Option::is_some));
        }
        let m = random_bounded(7, 1, 3).unwrap();
        assert!(m.max_degree() <= 1);
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = bipartite_hard(16, 4, 5).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("32 64 0\n"));
        let back = Network::read_edge_list(&buf[..]).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert!(Network::read_edge_list(&b"3 1 0\n0 0\n"[..]).is_err());
        assert!(Network::read_edge_list(&b"3 2 0\n0 1\n"[..]).is_err());
    }

    #[test]
    fn spec_strings() {
        for s in ["star:8", "path:16", "cycle:16", "random:32:4", "hard:16:4", "dibip:4"] {
            assert_eq!(s.parse::<GraphSpec>().unwrap().to_string(), s);
        }
        assert!("star".parse::<GraphSpec>().is_err());
        assert!("blob:3".parse::<GraphSpec>().is_err());
        assert!("random:3".parse::<GraphSpec>().is_err());
    }

    #[test]
    fn balls() {
        let p = path(6).unwrap();
        assert_eq!(p.ball(2, 2), vec![0, 1, 2, 3, 4]);
        assert_eq!(p.ball(0, 1), vec![0, 1]);
    }
}
