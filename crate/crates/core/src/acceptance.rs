//! The acceptance suite: ten pinned-seed criteria with one verdict each.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::lower_bound::{self, GapReport};
use crate::analysis::oracle;
use crate::analysis::report::with_pool;
use crate::analysis::stats::Summary;
use crate::analysis::sweep::{run_overhead_sweep, SweepGrid, SweepReport};
use crate::analysis::tail::{calibrate_c, tail_bound_check};
use crate::config::SimConstants;
use crate::error::{Error, Result};
use crate::model::NoiseModel;
use crate::network::{self, GraphSpec};
use crate::protocols::ProtocolSpec;
use crate::runner::{run_cell, Cell, SeedRange, SimKind};
use crate::sim_general::{share_knowledge, Sharing};
use crate::sim_static::{broadcast_decay, learn_delays_oracle, most_delayed, Primitives};

pub const CRITERIA: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Clone, Debug, Default)]
pub struct AcceptConfig {
    pub consts: SimConstants,
    /// Replaces the noise level of every noisy criterion.
    pub p_override: Option<f64>,
    /// Criteria to run; empty means all.
    pub criteria: Vec<u8>,
}

impl AcceptConfig {
    fn p(&self, pinned: f64) -> f64 {
        self.p_override.unwrap_or(pinned)
    }

    pub fn selected(&self) -> Vec<u8> {
        if self.criteria.is_empty() {
            CRITERIA.to_vec()
        } else {
            self.criteria.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.criteria.iter().find(|c| !CRITERIA.contains(c)) {
            return Err(Error::config(format!("unknown criterion {c} (1 to 10)")));
        }
        if let Some(p) = self.p_override.filter(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::param(format!("p must lie in [0, 1), got {p}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} ({:.1} s of {} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

fn title(id: u8) -> &'static str {
    match id {
        1 => "zero-noise equivalence",
        2 => "noisy correctness",
        3 => "progress-detection overhead shape",
        4 => "general-simulator overhead shape",
        5 => "binary-search oracle exactness",
        6 => "broadcast and knowledge-sharing floors",
        7 => "repetition versus coding gap",
        8 => "directed bipartite bound",
        9 => "tail bound after calibration",
        10 => "determinism",
        _ => "unknown",
    }
}

fn budget(id: u8) -> Duration {
    Duration::from_secs(match id {
        1 => 30,
        2 => 600,
        3 | 4 => 300,
        5 => 10,
        6 | 8 | 9 => 60,
        7 => 120,
        // Rerunning the criterion-2 grid.
        10 => 600,
        _ => 0,
    })
}

/// Carries the criterion-2 CSVs to the determinism check.
#[derive(Default)]
pub struct Suite {
    cfg: AcceptConfig,
    noisy_csv: Option<String>,
}

/// The five graph families of criteria 1 and 2.
pub fn acceptance_graphs() -> Vec<GraphSpec> {
    ["star:8", "path:16", "cycle:16", "random:32:4", "hard:16:4"]
        .iter()
        .map(|s| s.parse().expect("valid graph spec"))
        .collect()
}

pub fn acceptance_protocols(t: usize) -> Vec<ProtocolSpec> {
    vec![ProtocolSpec::Flood(t), ProtocolSpec::Silent(t), ProtocolSpec::RoundRobin(t)]
}

impl Suite {
    pub fn new(cfg: AcceptConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, noisy_csv: None })
    }

    /// Runs the selected criteria in order, reporting each as it finishes.
    pub fn run(&mut self, mut on_result: impl FnMut(&CriterionResult)) -> Result<Vec<CriterionResult>> {
        let mut out = Vec::new();
        for id in self.cfg.selected() {
            let r = with_pool(|| self.run_one(id))?;
            on_result(&r);
            out.push(r);
        }
        Ok(out)
    }

    pub fn run_one(&mut self, id: u8) -> CriterionResult {
        let start = Instant::now();
        let outcome = match id {
            1 => self.zero_noise(),
            2 => self.noisy_correctness(),
            3 => self.progress_shape(),
            4 => self.general_shape(),
            5 => self.oracle_search(),
            6 => self.floors(),
            7 => self.coding_gap(),
            8 => self.directed_bipartite(),
            9 => self.tail_bound(),
            10 => self.determinism(),
            _ => Err(Error::config(format!("unknown criterion {id}"))),
        };
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let within = elapsed <= budget(id);
        CriterionResult {
            id,
            title: title(id),
            passed: ok && within,
            detail: if within { detail } else { format!("{detail}; over the time budget") },
            elapsed,
            budget: budget(id),
        }
    }

    fn cell(&self, graph: GraphSpec, protocol: ProtocolSpec, sim: SimKind, p: f64, seed: u64) -> Cell {
        Cell {
            graph,
            protocol,
            sim,
            p,
            seed,
            consts: self.cfg.consts,
            oracle: false,
        }
    }

    fn zero_noise(&self) -> Result<(bool, String)> {
        let mut cells = Vec::new();
        for sim in SimKind::ALL {
            for graph in acceptance_graphs() {
                for protocol in acceptance_protocols(64) {
                    for seed in 1..=5 {
                        cells.push(self.cell(graph, protocol, sim, 0.0, seed));
                    }
                }
            }
        }
        let outs: Vec<Result<bool>> = cells.par_iter().map(|c| run_cell(c).map(|o| o.verified)).collect();
        let mut failed = Vec::new();
        for (c, o) in cells.iter().zip(outs) {
            match o {
                Ok(true) => {}
                Ok(false) => failed.push(format!("{} {} {} seed {}", c.sim, c.graph, c.protocol, c.seed)),
                Err(e) => failed.push(format!("{} {} {} seed {}: {e}", c.sim, c.graph, c.protocol, c.seed)),
            }
        }
        let ok = cells.len() - failed.len();
        let mut detail = format!("{ok}/{} runs verified at p=0", cells.len());
        if let Some(f) = failed.first() {
            detail.push_str(&format!("; first failure: {f}"));
        }
        Ok((failed.is_empty(), detail))
    }

    fn noisy_grid(&self) -> SweepGrid {
        SweepGrid {
            graphs: acceptance_graphs(),
            protocols: acceptance_protocols(64),
            sims: SimKind::ALL.to_vec(),
            ps: vec![self.cfg.p(0.3)],
            seeds: SeedRange { first: 1, last: 100 },
            consts: self.cfg.consts,
            oracle: false,
        }
    }

    fn grid_csv(rep: &SweepReport) -> String {
        rep.csvs().iter().map(|r| r.to_csv_string(false)).collect::<Vec<_>>().join("\n")
    }

    fn noisy_correctness(&mut self) -> Result<(bool, String)> {
        let rep = run_overhead_sweep(&self.noisy_grid())?;
        self.noisy_csv = Some(Self::grid_csv(&rep));
        let mut worst: Option<(f64, String)> = None;
        let mut bad = Vec::new();
        for row in &rep.rows {
            let need = if row.point.sim == SimKind::Static { 0.95 } else { 0.99 };
            let label = format!("{} {} {}", row.point.sim, row.point.graph, row.point.protocol);
            if row.verified_rate < need {
                bad.push(format!("{label} {:.2}", row.verified_rate));
            }
            if worst.as_ref().is_none_or(|(w, _)| row.verified_rate < *w) {
                worst = Some((row.verified_rate, label));
            }
        }
        let (w, label) = worst.unwrap_or((1.0, String::new()));
        let mut detail = format!(
            "{} cells of 100 seeds at p={}; lowest verification {:.2} ({label})",
            rep.rows.len(),
            self.cfg.p(0.3),
            w
        );
        if !bad.is_empty() {
            detail.push_str(&format!("; below threshold: {}", bad.join(", ")));
        }
        Ok((bad.is_empty(), detail))
    }

    fn star_means(&self, sim: SimKind, deltas: &[usize], t: usize, p: f64, seeds: u64) -> Result<Vec<f64>> {
        let grid = SweepGrid {
            graphs: deltas.iter().map(|&delta| GraphSpec::Star { delta }).collect(),
            protocols: vec![ProtocolSpec::Flood(t)],
            sims: vec![sim],
            ps: vec![p],
            seeds: SeedRange { first: 1, last: seeds },
            consts: self.cfg.consts,
            oracle: false,
        };
        let rep = run_overhead_sweep(&grid)?;
        Ok(rep.rows.iter().map(|r| r.per_t.mean).collect())
    }

    fn progress_shape(&self) -> Result<(bool, String)> {
        let m = self.star_means(SimKind::Progress, &[16, 64, 256], 256, self.cfg.p(0.5), 50)?;
        let ratio = m[2] / m[0];
        Ok((
            (1.0..=2.5).contains(&ratio),
            format!(
                "rounds/T {:.3}, {:.3}, {:.3} at Δ=16, 64, 256; ratio 256/16 = {ratio:.3}, needs [1.0, 2.5]",
                m[0], m[1], m[2]
            ),
        ))
    }

    fn general_shape(&self) -> Result<(bool, String)> {
        let m = self.star_means(SimKind::General, &[8, 16, 32], 64, self.cfg.p(0.3), 25)?;
        let r1 = m[1] / m[0];
        let r2 = m[2] / m[1];
        Ok((
            r1 >= 1.7 && r2 >= 1.7,
            format!(
                "mean rounds {:.0}, {:.0}, {:.0} at Δ=8, 16, 32; ratios {r1:.3}, {r2:.3}, need >= 1.7",
                m[0] * 64.0,
                m[1] * 64.0,
                m[2] * 64.0
            ),
        ))
    }

    fn oracle_search(&self) -> Result<(bool, String)> {
        let mut exact = 0;
        let mut checked_nodes = 0;
        let mut first_bad = None;
        for i in 1..=200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let n = rng.gen_range(4..=32);
            let delta = rng.gen_range(2..=6);
            let net = network::random_bounded(n, delta, i)?;
            let q = self.cfg.consts.window(n);
            let hi = rng.gen_range(q..=q + 256);
            let lo = hi.saturating_sub(q);
            let t: Vec<usize> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
            let (m, _) = learn_delays_oracle(&net, &t, lo, hi)?;
            let mut ok = true;
            for v in most_delayed(&net, &t) {
                checked_nodes += 1;
                for &w in net.neighbors(v).iter().chain(std::iter::once(&v)) {
                    if m[w] != t[v] {
                        ok = false;
                        first_bad.get_or_insert(format!("instance {i}: node {w} learned {} instead of {}", m[w], t[v]));
                    }
                }
            }
            exact += usize::from(ok);
        }
        let mut detail = format!("{exact}/200 instances exact ({checked_nodes} most delayed nodes)");
        if let Some(b) = first_bad {
            detail.push_str(&format!("; {b}"));
        }
        Ok((exact == 200, detail))
    }

    fn floors(&self) -> Result<(bool, String)> {
        const TRIALS: u64 = 10_000;
        let p = self.cfg.p(0.5);
        let net = network::star(32)?;
        let consts = self.cfg.consts;
        let n = net.len();
        // Trial k: leaves 1..=8 send and the center listens, then each fixed
        // node shares a message with all of its neighbors.
        let per_trial: Vec<(bool, bool, bool)> = (1..=TRIALS)
            .into_par_iter()
            .map(|k| -> Result<(bool, bool, bool)> {
                let noise = NoiseModel::new(p, k)?;
                let mut prim = Primitives::new(&net, &noise, consts, false);
                let msgs: Vec<Option<u32>> = (0..n).map(|v| (1..=8).contains(&v).then_some(1)).collect();
                let got = broadcast_decay(&mut prim, &msgs);
                let mut sharing = Sharing::new(&net, &noise, &consts, false);
                let all: Vec<Option<usize>> = (0..n).map(Some).collect();
                let heard = share_knowledge(&mut sharing, &all);
                let center_all = heard[0].len() == 32;
                let leaf_all = heard[1].len() == 1;
                Ok((got[0].is_some(), center_all, leaf_all))
            })
            .collect::<Result<_>>()?;
        let freq = |f: fn(&(bool, bool, bool)) -> bool| per_trial.iter().filter(|x| f(x)).count() as f64 / TRIALS as f64;
        let bcast = freq(|x| x.0);
        let center = freq(|x| x.1);
        let leaf = freq(|x| x.2);
        let floor = 0.75 - 4.0 * oracle::binomial_sigma(0.75, TRIALS as usize);
        Ok((
            bcast >= 0.9 && center >= floor && leaf >= floor,
            format!("broadcast success {bcast:.4} (needs 0.9); hears all neighbors: center {center:.4}, leaf {leaf:.4} (needs {floor:.4})"),
        ))
    }

    fn coding_gap(&self) -> Result<(bool, String)> {
        let p = self.cfg.p(0.5);
        let rep_seeds: Vec<u64> = (1..=100).collect();
        let coded_seeds: Vec<u64> = (1..=10).collect();
        let rep = lower_bound::star_repetition_rounds(1024, 64, p, &rep_seeds)?;
        let coded: Vec<u64> = lower_bound::star_coded_rounds(1024, 256, p, &coded_seeds)?
            .iter()
            .map(|c| c.rounds)
            .collect();
        let g = GapReport::from_runs(1024, p, 64, &rep, 256, &coded);
        let ok = g.repetition_per_t() >= 5.0 && g.oracle_error() <= 0.02 && g.coded_per_t() <= 2.5 && g.margin_sigmas() >= 4.0;
        Ok((
            ok,
            format!(
                "repetition {:.4}/T (needs >= 5; oracle {:.4}, off by {:.2}%, needs <= 2%), coded {:.4}/T (needs <= 2.5), margin {:.1} sigma (needs 4)",
                g.repetition_per_t(),
                g.oracle_per_message,
                100.0 * g.oracle_error(),
                g.coded_per_t(),
                g.margin_sigmas()
            ),
        ))
    }

    fn directed_bipartite(&self) -> Result<(bool, String)> {
        let p = self.cfg.p(0.5);
        let seeds: Vec<u64> = (1..=50).collect();
        let runs = lower_bound::directed_bipartite_experiment(64, p, &seeds)?;
        let mean = Summary::of_counts(&runs.iter().map(|r| r.total).collect::<Vec<_>>()).mean;
        let exact = 64.0 * oracle::expected_max_geometric(64, 1.0 - p);
        let err = (mean - exact).abs() / exact;
        Ok((
            mean >= 192.0 && err <= 0.05,
            format!(
                "mean {mean:.2} rounds (needs >= 192), exact {exact:.2}, off by {:.2}% (needs <= 5%)",
                100.0 * err
            ),
        ))
    }

    fn tail_bound(&self) -> Result<(bool, String)> {
        let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
        let cal = calibrate_c(4, 4, 0.5, 100_000, &grid, 1)?;
        let Some(c) = cal.c else {
            return Ok((false, "no grid value of C passes at Δ=4, T=4".into()));
        };
        let s = tail_bound_check(16, 32, 0.5, 100_000, &grid, c, 2)?;
        let curve: Vec<String> = s.exceedance.iter().map(|e| format!("{e:.5}")).collect();
        Ok((
            s.passed(),
            match s.first_failure() {
                None => format!("calibrated C = {c}; exceedance at Δ=32, T=16 for t=1..5: {}", curve.join(" ")),
                Some(t) => format!("calibrated C = {c}; exceedance too high at t = {t}: {}", curve.join(" ")),
            },
        ))
    }

    fn determinism(&mut self) -> Result<(bool, String)> {
        let first = match self.noisy_csv.take() {
            Some(csv) => csv,
            None => Self::grid_csv(&run_overhead_sweep(&self.noisy_grid())?),
        };
        let second = Self::grid_csv(&run_overhead_sweep(&self.noisy_grid())?);
        let same = first == second;
        Ok((
            same,
            if same {
                format!("criterion-2 CSVs identical on rerun ({} bytes)", first.len())
            } else {
                let line = first.lines().zip(second.lines()).position(|(a, b)| a != b).map_or(0, |i| i + 1);
                format!("CSVs differ, first at line {line}")
            },
        ))
    }
}

/// Convenience: runs the suite and returns every result.
pub fn run_acceptance(cfg: AcceptConfig, on_result: impl FnMut(&CriterionResult)) -> Result<Vec<CriterionResult>> {
    Suite::new(cfg)?.run(on_result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_criteria_are_rejected() {
        let cfg = AcceptConfig {
            criteria: vec![11],
            ..Default::default()
        };
        assert!(Suite::new(cfg).is_err());
        let cfg = AcceptConfig {
            p_override: Some(1.5),
            ..Default::default()
        };
        assert!(Suite::new(cfg).is_err());
    }

    #[test]
    fn result_line_format() {
        let r = CriterionResult {
            id: 5,
            title: title(5),
            passed: true,
            detail: "200/200".into(),
            elapsed: Duration::from_millis(1500),
            budget: budget(5),
        };
        assert_eq!(r.to_string(), "criterion  5 PASS binary-search oracle exactness: 200/200 (1.5 s of 10 s)");
    }
}
