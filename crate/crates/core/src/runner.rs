//! One (graph, protocol, simulator, seed) cell, as used by the command line,
//! the sweeps and the acceptance suite.

use std::fmt;
use std::str::FromStr;

use crate::config::SimConstants;
use crate::error::{Error, Result};
use crate::model::NoiseModel;
use crate::network::{GraphSpec, Network};
use crate::protocols::ProtocolSpec;
use crate::transcript::History;
use crate::{sim_general, sim_progress, sim_static};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimKind {
    Progress,
    Static,
    General,
}

impl SimKind {
    pub const ALL: [SimKind; 3] = [SimKind::Progress, SimKind::Static, SimKind::General];

    pub fn csv_header(self) -> &'static str {
        match self {
            SimKind::Progress => sim_progress::CSV_HEADER,
            SimKind::Static => sim_static::CSV_HEADER,
            SimKind::General => sim_general::CSV_HEADER,
        }
    }
}

impl fmt::Display for SimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimKind::Progress => "progress",
            SimKind::Static => "static",
            SimKind::General => "general",
        })
    }
}

impl FromStr for SimKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "progress" => Ok(SimKind::Progress),
            "static" => Ok(SimKind::Static),
            "general" => Ok(SimKind::General),
            other => Err(Error::config(format!("unknown simulator {other:?} (progress, static, general)"))),
        }
    }
}

/// Inclusive seed range `a..b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedRange {
    pub first: u64,
    pub last: u64,
}

impl SeedRange {
    pub fn single(seed: u64) -> Self {
        Self { first: seed, last: seed }
    }

    pub fn count(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.first..=self.last
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl FromStr for SeedRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("seed range {s:?} must look like a..b or a single seed"));
        let (a, b) = match s.trim().split_once("..") {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), s.trim()),
        };
        let first: u64 = a.parse().map_err(|_| bad())?;
        let last: u64 = b.parse().map_err(|_| bad())?;
        if last < first {
            return Err(bad());
        }
        Ok(Self { first, last })
    }
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub graph: GraphSpec,
    pub protocol: ProtocolSpec,
    pub sim: SimKind,
    pub p: f64,
    pub seed: u64,
    pub consts: SimConstants,
    pub oracle: bool,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub verified: bool,
    /// Simulation rounds until every node finished, or the budget.
    pub rounds: u64,
    pub finished: bool,
    /// Row in the simulator's CSV layout.
    pub row: String,
    pub histories: Vec<History>,
    pub network: Network,
}

/// Rejects combinations no simulator accepts, before any work is done.
pub fn validate(cell: &Cell) -> Result<()> {
    if !(0.0..1.0).contains(&cell.p) {
        return Err(Error::param(format!("p must lie in [0, 1), got {}", cell.p)));
    }
    if matches!(cell.graph, GraphSpec::DirectedBipartite { .. }) {
        return Err(Error::Directed(match cell.sim {
            SimKind::Progress => "the progress-detection simulator",
            SimKind::Static => "the static simulator",
            SimKind::General => "the general simulator",
        }));
    }
    if cell.oracle && cell.sim == SimKind::Progress {
        return Err(Error::config("oracle mode applies to the static and general simulators"));
    }
    Ok(())
}

pub fn run_cell(cell: &Cell) -> Result<Outcome> {
    validate(cell)?;
    let network = cell.graph.build(cell.seed)?;
    let protocol = cell.protocol.build(&network, cell.seed)?;
    let inputs = protocol.inputs(&network, cell.seed);
    let noise = NoiseModel::new(cell.p, cell.seed)?;
    let t_len = protocol.length();
    let graph = cell.graph.to_string();
    let c = &cell.consts;
    let (verified, rounds, finished, row, histories) = match cell.sim {
        SimKind::Progress => {
            let r = sim_progress::run(&network, protocol.as_ref(), &inputs, &noise, c)?;
            let row = sim_progress::csv_row(&graph, &network, t_len, cell.p, cell.seed, &r);
            (r.all_verified(), r.rounds_used, r.finished(), row, r.histories)
        }
        SimKind::Static => {
            let r = sim_static::run(&network, protocol, &inputs, &noise, c, cell.oracle)?;
            let row = sim_static::csv_row(&graph, &network, t_len, cell.p, c, cell.seed, &r);
            (r.all_verified(), r.rounds_used, r.finished(), row, r.histories)
        }
        SimKind::General => {
            let r = sim_general::main_general(&network, protocol.as_ref(), &inputs, &noise, c, cell.oracle)?;
            let row = sim_general::csv_row(&graph, &network, t_len, cell.p, c, cell.seed, &r);
            (r.all_verified(), r.rounds_used, r.finished(), row, r.histories)
        }
    };
    Ok(Outcome {
        verified,
        rounds,
        finished,
        row,
        histories,
        network,
    })
}

/// Runs independent cells on the current rayon pool; results keep the input
/// order.
pub fn run_cells(cells: &[Cell]) -> Vec<Result<Outcome>> {
    use rayon::prelude::*;
    cells.par_iter().map(run_cell).collect()
}
