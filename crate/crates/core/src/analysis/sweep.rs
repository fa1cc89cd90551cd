//! Overhead sweeps over (graph, protocol, simulator, p) grids.

use rayon::prelude::*;

use super::report::{fmt_f, CsvReport};
use super::stats::Summary;
use crate::config::SimConstants;
use crate::error::{Error, Result};
use crate::network::GraphSpec;
use crate::protocols::ProtocolSpec;
use crate::runner::{run_cell, Cell, Outcome, SeedRange, SimKind};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub graphs: Vec<GraphSpec>,
    pub protocols: Vec<ProtocolSpec>,
    pub sims: Vec<SimKind>,
    pub ps: Vec<f64>,
    pub seeds: SeedRange,
    pub consts: SimConstants,
    pub oracle: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub graph: GraphSpec,
    pub protocol: ProtocolSpec,
    pub sim: SimKind,
    pub p: f64,
}

impl SweepGrid {
    /// Grid points in output order: graph, protocol, simulator, then p.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &graph in &self.graphs {
            for &protocol in &self.protocols {
                for &sim in &self.sims {
                    for &p in &self.ps {
                        out.push(GridPoint { graph, protocol, sim, p });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.points().is_empty() {
            return Err(Error::config("the sweep grid is empty"));
        }
        for pt in self.points() {
            crate::runner::validate(&self.cell(pt, self.seeds.first))?;
        }
        Ok(())
    }

    fn cell(&self, pt: GridPoint, seed: u64) -> Cell {
        Cell {
            graph: pt.graph,
            protocol: pt.protocol,
            sim: pt.sim,
            p: pt.p,
            seed,
            consts: self.consts,
            oracle: self.oracle,
        }
    }

    /// Every (grid point, seed) cell, in deterministic (grid, seed) order.
    pub fn cells(&self) -> Vec<Cell> {
        self.points()
            .into_iter()
            .flat_map(|pt| self.seeds.iter().map(move |s| (pt, s)))
            .map(|(pt, s)| self.cell(pt, s))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub point: GridPoint,
    pub delta: usize,
    pub n: usize,
    pub rounds: Summary,
    pub per_t: Summary,
    pub verified_rate: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<(Cell, Outcome)>,
    pub grid: SweepGrid,
}

pub const SUMMARY_HEADER: &str = "graph,Δ,n,protocol,T,sim,p,seeds,oracle,c1,c3,cQ,c4,c5,k,B,runs,mean_rounds,p50_rounds,p95_rounds,mean_rounds_per_T,p50_rounds_per_T,p95_rounds_per_T,verified_rate";

/// Runs all cells of the grid on the current rayon pool. Any unverified run
/// at `p = 0` is an engine bug and aborts the sweep.
pub fn run_overhead_sweep(grid: &SweepGrid) -> Result<SweepReport> {
    grid.validate()?;
    let cells = grid.cells();
    let outcomes = cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>()?;
    for (cell, out) in cells.iter().zip(&outcomes) {
        if cell.p == 0.0 && !out.verified {
            return Err(Error::Verification(format!(
                "noiseless run failed: sim={} graph={} protocol={} seed={}",
                cell.sim, cell.graph, cell.protocol, cell.seed
            )));
        }
    }
    let per_point = grid.seeds.count();
    let rows = grid
        .points()
        .into_iter()
        .zip(outcomes.chunks(per_point))
        .map(|(point, outs)| {
            let t = point.protocol.length().max(1) as f64;
            let rounds: Vec<f64> = outs.iter().map(|o| o.rounds as f64).collect();
            let per_t: Vec<f64> = rounds.iter().map(|r| r / t).collect();
            SweepRow {
                point,
                delta: outs.iter().map(|o| o.network.max_degree()).max().unwrap_or(0),
                n: outs[0].network.len(),
                rounds: Summary::of(&rounds),
                per_t: Summary::of(&per_t),
                verified_rate: outs.iter().filter(|o| o.verified).count() as f64 / outs.len() as f64,
            }
        })
        .collect();
    Ok(SweepReport {
        rows,
        outcomes: cells.into_iter().zip(outcomes).collect(),
        grid: grid.clone(),
    })
}

impl SweepReport {
    pub fn summary_csv(&self) -> CsvReport {
        let g = &self.grid;
        let c = &g.consts;
        let mut r = CsvReport::new("summary", SUMMARY_HEADER);
        for row in &self.rows {
            let pt = &row.point;
            r.push(format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                pt.graph,
                row.delta,
                row.n,
                pt.protocol,
                pt.protocol.length(),
                pt.sim,
                pt.p,
                g.seeds,
                u8::from(g.oracle),
                c.c1,
                c.c3,
                c.cq,
                c.c4,
                c.c5,
                c.progress_budget,
                c.payload_cap,
                row.rounds.count,
                fmt_f(row.rounds.mean),
                row.rounds.p50,
                row.rounds.p95,
                fmt_f(row.per_t.mean),
                fmt_f(row.per_t.p50),
                fmt_f(row.per_t.p95),
                fmt_f(row.verified_rate)
            ));
        }
        r
    }

    /// Per-run rows in each simulator's own layout, one report per simulator
    /// present in the grid.
    pub fn run_csvs(&self) -> Vec<CsvReport> {
        let mut out = Vec::new();
        for &sim in &self.grid.sims {
            let mut r = CsvReport::new(format!("runs-{sim}"), sim.csv_header());
            for (cell, o) in &self.outcomes {
                if cell.sim == sim {
                    r.push(o.row.clone());
                }
            }
            out.push(r);
        }
        out
    }

    pub fn csvs(&self) -> Vec<CsvReport> {
        let mut v = vec![self.summary_csv()];
        v.extend(self.run_csvs());
        v
    }

    pub fn row(&self, graph: &GraphSpec, sim: SimKind) -> Option<&SweepRow> {
        self.rows.iter().find(|r| &r.point.graph == graph && r.point.sim == sim)
    }
}
