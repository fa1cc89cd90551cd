//! Declarative experiments: a flat `key = value` file under an
//! `[experiment]` header, dispatched to the analysis operations.
//!
//! ```text
//! [experiment]
//! name = overhead-sweep
//! graphs = star:16, star:256
//! protocol = flood:256
//! sim = progress
//! p = 0.5
//! seeds = 1..50
//! const.c1 = 4
//! out = sweep.csv
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::lower_bound::{self, GapReport};
use super::oracle;
use super::report::{fmt_f, CsvReport};
use super::stats::Summary;
use super::sweep::{run_overhead_sweep, SweepGrid};
use super::tail::{calibrate_c, tail_bound_check, threshold, TailBoundSample};
use crate::config::SimConstants;
use crate::error::{Error, Result};
use crate::network::GraphSpec;
use crate::protocols::ProtocolSpec;
use crate::runner::{SeedRange, SimKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    OverheadSweep,
    LowerBound,
    TailBound,
    DirectedBipartite,
    HardInstance,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::OverheadSweep,
        ExperimentKind::LowerBound,
        ExperimentKind::TailBound,
        ExperimentKind::DirectedBipartite,
        ExperimentKind::HardInstance,
    ];
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::OverheadSweep => "overhead-sweep",
            ExperimentKind::LowerBound => "lower-bound",
            ExperimentKind::TailBound => "tail-bound",
            ExperimentKind::DirectedBipartite => "directed-bipartite",
            ExperimentKind::HardInstance => "hard-instance",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.to_string() == s.trim()).ok_or_else(|| {
            let names: Vec<String> = Self::ALL.iter().map(ToString::to_string).collect();
            Error::config(format!("unknown experiment {s:?} (known: {})", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub graphs: Vec<GraphSpec>,
    pub protocols: Vec<ProtocolSpec>,
    pub sims: Vec<SimKind>,
    pub ps: Vec<f64>,
    pub seeds: SeedRange,
    pub consts: SimConstants,
    pub oracle: bool,
    pub out: Option<PathBuf>,
    /// Overrides every protocol's length when set.
    pub t_len: Option<usize>,
    pub deltas: Vec<usize>,
    pub coded_t: usize,
    pub coded_seeds: Option<SeedRange>,
    pub samples: usize,
    pub t_grid: Vec<f64>,
    pub q: f64,
    pub c: Option<f64>,
    pub calibrate_delta: usize,
    pub calibrate_t: usize,
    pub n: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            graphs: Vec::new(),
            protocols: Vec::new(),
            sims: Vec::new(),
            ps: Vec::new(),
            seeds: SeedRange::single(1),
            consts: SimConstants::default(),
            oracle: false,
            out: None,
            t_len: None,
            deltas: Vec::new(),
            coded_t: 256,
            coded_seeds: None,
            samples: 100_000,
            t_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            q: 0.5,
            c: None,
            calibrate_delta: 4,
            calibrate_t: 4,
            n: 16,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut in_section = false;
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            if line.starts_with('[') {
                if line != "[experiment]" {
                    return Err(err(format!("unknown section {line}")));
                }
                in_section = true;
                continue;
            }
            if !in_section {
                return Err(err("keys must follow an [experiment] header".into()));
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let name = pairs
            .iter()
            .find(|(_, k, _)| k == "name")
            .ok_or_else(|| Error::config("experiment file has no name"))?;
        let mut spec = Self::new(name.2.parse()?);
        for (line, k, v) in pairs.iter().filter(|(_, k, _)| k != "name") {
            spec.set(k, v).map_err(|e| Error::Parse { line: *line, message: e.to_string() })?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Applies one setting, from the file or from a command-line flag.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn list<T: FromStr>(v: &str) -> Result<Vec<T>>
        where
            T::Err: fmt::Display,
        {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|e| Error::config(format!("bad list entry {s:?}: {e}"))))
                .collect()
        }
        fn one<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::config(format!("bad value for {key}: {v:?}")))
        }
        if let Some(c) = key.strip_prefix("const.") {
            return self.consts.set(c, value);
        }
        match key {
            "name" => self.kind = value.parse()?,
            "graph" | "graphs" => self.graphs = list(value)?,
            "protocol" | "protocols" => self.protocols = list(value)?,
            "sim" | "sims" => self.sims = list(value)?,
            "p" => self.ps = list(value)?,
            "seed" | "seeds" => self.seeds = value.parse()?,
            "oracle" | "oracle-mode" => self.oracle = one::<bool>(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "T" => self.t_len = Some(one(key, value)?),
            "delta" | "Δ" => self.deltas = list(value)?,
            "coded_T" => self.coded_t = one(key, value)?,
            "coded_seeds" => self.coded_seeds = Some(value.parse()?),
            "samples" => self.samples = one(key, value)?,
            "t" => self.t_grid = list(value)?,
            "q" => self.q = one(key, value)?,
            "C" => self.c = Some(one(key, value)?),
            "calibrate_delta" => self.calibrate_delta = one(key, value)?,
            "calibrate_T" => self.calibrate_t = one(key, value)?,
            "n" => self.n = one(key, value)?,
            other => return Err(Error::config(format!("unknown experiment key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.ps.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::param(format!("p must lie in [0, 1), got {p}")));
        }
        let empty = |what: &str| Err(Error::config(format!("{} needs a non-empty {what} list", self.kind)));
        if self.kind == ExperimentKind::OverheadSweep {
            if self.graphs.is_empty() {
                return empty("graphs");
            }
            if self.protocols.is_empty() {
                return empty("protocol");
            }
            if self.sims.is_empty() {
                return empty("sim");
            }
        }
        if self.t_grid.is_empty() {
            return empty("t");
        }
        if self.samples == 0 || self.coded_t == 0 {
            return Err(Error::param("samples and coded_T must be positive"));
        }
        Ok(())
    }

    fn ps_or(&self, default: f64) -> Vec<f64> {
        if self.ps.is_empty() {
            vec![default]
        } else {
            self.ps.clone()
        }
    }

    fn deltas_or(&self, default: usize) -> Vec<usize> {
        if self.deltas.is_empty() {
            vec![default]
        } else {
            self.deltas.clone()
        }
    }

    fn seeds_vec(&self) -> Vec<u64> {
        self.seeds.iter().collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub reports: Vec<CsvReport>,
    /// Summary lines for the terminal.
    pub lines: Vec<String>,
    pub passed: bool,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::OverheadSweep => overhead_sweep(spec),
        ExperimentKind::LowerBound => lower_bound_gap(spec),
        ExperimentKind::TailBound => tail_bound(spec),
        ExperimentKind::DirectedBipartite => directed_bipartite(spec),
        ExperimentKind::HardInstance => hard_instance(spec),
    }
}

fn overhead_sweep(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let protocols = spec
        .protocols
        .iter()
        .map(|p| spec.t_len.map_or(*p, |t| p.with_length(t)))
        .collect();
    let grid = SweepGrid {
        graphs: spec.graphs.clone(),
        protocols,
        sims: spec.sims.clone(),
        ps: spec.ps_or(0.0),
        seeds: spec.seeds,
        consts: spec.consts,
        oracle: spec.oracle,
    };
    let rep = run_overhead_sweep(&grid)?;
    let lines = rep
        .rows
        .iter()
        .map(|r| {
            format!(
                "{} {} {} p={}: mean {} rounds ({}/T), verified {}",
                r.point.sim,
                r.point.graph,
                r.point.protocol,
                r.point.p,
                fmt_f(r.rounds.mean),
                fmt_f(r.per_t.mean),
                fmt_f(r.verified_rate)
            )
        })
        .collect();
    Ok(ExperimentOutput {
        reports: rep.csvs(),
        lines,
        passed: true,
    })
}

fn lower_bound_gap(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let t_rep = spec.t_len.unwrap_or(64);
    let rep_seeds = spec.seeds_vec();
    let coded_seeds: Vec<u64> = spec.coded_seeds.unwrap_or(spec.seeds).iter().collect();
    let mut repetition = CsvReport::new("repetition", "Δ,T,p,seed,rounds,rounds_per_T");
    let mut coded = CsvReport::new("coded", "Δ,T,p,seed,rounds,rounds_per_T,redundant");
    let mut out = ExperimentOutput {
        passed: true,
        ..Default::default()
    };
    for delta in spec.deltas_or(1024) {
        for p in spec.ps_or(0.5) {
            let rr = lower_bound::star_repetition_rounds(delta, t_rep, p, &rep_seeds)?;
            for (s, r) in rep_seeds.iter().zip(&rr) {
                repetition.push(format!("{delta},{t_rep},{p},{s},{r},{}", fmt_f(*r as f64 / t_rep as f64)));
            }
            let cr = lower_bound::star_coded_rounds(delta, spec.coded_t, p, &coded_seeds)?;
            for (s, r) in coded_seeds.iter().zip(&cr) {
                coded.push(format!(
                    "{delta},{},{p},{s},{},{},{}",
                    spec.coded_t,
                    r.rounds,
                    fmt_f(r.rounds as f64 / spec.coded_t as f64),
                    r.redundant
                ));
            }
            let coded_rounds: Vec<u64> = cr.iter().map(|c| c.rounds).collect();
            let g = GapReport::from_runs(delta, p, t_rep, &rr, spec.coded_t, &coded_rounds);
            out.passed &= g.margin_sigmas() >= 4.0;
            out.lines.push(g.summary_line());
        }
    }
    out.reports = vec![repetition, coded];
    Ok(out)
}

const TAIL_HEADER: &str = "phase,T,Δ,q,C,samples,t,threshold,exceedance,tolerance,pass";

fn tail_rows(report: &mut CsvReport, phase: &str, s: &TailBoundSample) {
    for (i, &t) in s.t_grid.iter().enumerate() {
        report.push(format!(
            "{phase},{},{},{},{},{},{t},{},{},{},{}",
            s.t_len,
            s.delta,
            s.q,
            s.c,
            s.samples,
            fmt_f(threshold(s.t_len, s.delta, s.c, t)),
            s.exceedance[i],
            fmt_f(s.tolerance[i]),
            u8::from(s.passes()[i])
        ));
    }
}

fn tail_bound(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let seed = spec.seeds.first;
    let mut report = CsvReport::new("tail", TAIL_HEADER);
    let mut out = ExperimentOutput::default();
    let c = match spec.c {
        Some(c) => c,
        None => {
            let cal = calibrate_c(spec.calibrate_t, spec.calibrate_delta, spec.q, spec.samples, &spec.t_grid, seed)?;
            for s in &cal.tried {
                tail_rows(&mut report, "calibration", s);
            }
            let c = cal.c.ok_or_else(|| Error::Verification("no grid value of C passes at the calibration point".into()))?;
            out.lines.push(format!(
                "calibrated C = {c} at Δ={} T={} q={}",
                spec.calibrate_delta, spec.calibrate_t, spec.q
            ));
            c
        }
    };
    let t_len = spec.t_len.unwrap_or(16);
    let delta = spec.deltas_or(32)[0];
    let s = tail_bound_check(t_len, delta, spec.q, spec.samples, &spec.t_grid, c, seed.wrapping_add(1))?;
    tail_rows(&mut report, "check", &s);
    out.passed = s.passed();
    out.lines.push(match s.first_failure() {
        None => format!("tail bound at Δ={delta} T={t_len} C={c}: pass"),
        Some(t) => format!("tail bound at Δ={delta} T={t_len} C={c}: FAIL at t={t}"),
    });
    out.reports = vec![report];
    Ok(out)
}

fn directed_bipartite(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let seeds = spec.seeds_vec();
    let mut report = CsvReport::new("directed-bipartite", "Δ,p,seed,total_rounds,mean_rounds_per_sender");
    let mut out = ExperimentOutput {
        passed: true,
        ..Default::default()
    };
    for delta in spec.deltas_or(64) {
        for p in spec.ps_or(0.5) {
            let runs = lower_bound::directed_bipartite_experiment(delta, p, &seeds)?;
            for (s, r) in seeds.iter().zip(&runs) {
                report.push(format!("{delta},{p},{s},{},{}", r.total, fmt_f(r.total as f64 / delta as f64)));
            }
            let mean = Summary::of_counts(&runs.iter().map(|r| r.total).collect::<Vec<_>>()).mean;
            let exact = delta as f64 * oracle::expected_max_geometric(delta, 1.0 - p);
            let floor = 0.5 * delta as f64 * (delta as f64).log2();
            let ok = mean >= floor && (mean - exact).abs() <= 0.05 * exact;
            out.passed &= ok;
            out.lines.push(format!(
                "directed bipartite Δ={delta} p={p}: mean {} rounds, exact {}, floor 0.5·Δ·log2Δ = {}",
                fmt_f(mean),
                fmt_f(exact),
                fmt_f(floor)
            ));
        }
    }
    out.reports = vec![report];
    Ok(out)
}

fn hard_instance(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let seeds = spec.seeds_vec();
    let t_len = spec.t_len.unwrap_or(16);
    let mut report = CsvReport::new(
        "hard-instance",
        "n,Δ,T,p,seeds,sim,mean_rounds,p50_rounds,p95_rounds,mean_rounds_per_T,verified_rate",
    );
    let mut out = ExperimentOutput {
        passed: true,
        ..Default::default()
    };
    for delta in spec.deltas_or(4) {
        for p in spec.ps_or(0.3) {
            for row in lower_bound::hard_instance_experiment(spec.n, delta, t_len, p, &seeds, &spec.consts)? {
                report.push(format!(
                    "{},{delta},{t_len},{p},{},{},{},{},{},{},{}",
                    spec.n,
                    spec.seeds,
                    row.sim,
                    fmt_f(row.rounds.mean),
                    row.rounds.p50,
                    row.rounds.p95,
                    fmt_f(row.per_t()),
                    fmt_f(row.verified_rate)
                ));
                out.lines.push(format!(
                    "hard instance n={} Δ={delta} p={p} {}: {}/T, verified {}",
                    spec.n,
                    row.sim,
                    fmt_f(row.per_t()),
                    fmt_f(row.verified_rate)
                ));
            }
        }
    }
    out.reports = vec![report];
    Ok(out)
}
