//! Monte Carlo check of the tail bound for sums of maxima of geometric
//! variables: `P[sum_{i<T} Y_i >= C (T ln delta + t)] <= exp(-t)`, where each
//! `Y_i` is the maximum of `delta` independent Geometric(q) variables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::oracle;
use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// The fixed grid `{1, 1.5, 2, ..., 8}` searched by [`calibrate_c`].
pub fn c_grid() -> Vec<f64> {
    (0..=14).map(|i| 1.0 + 0.5 * i as f64).collect()
}

/// One Geometric(q) draw on `{1, 2, ...}` by inversion.
fn geometric(rng: &mut ChaCha8Rng, q: f64) -> u64 {
    if q >= 1.0 {
        return 1;
    }
    // `1 - gen()` lies in (0, 1], so the logarithm is finite.
    let u: f64 = 1.0 - rng.gen::<f64>();
    1 + (u.ln() / (1.0 - q).ln()).floor() as u64
}

fn validate(t_len: usize, delta: usize, q: f64, samples: usize) -> Result<()> {
    if t_len == 0 || delta < 2 || samples == 0 {
        return Err(Error::param(format!(
            "tail check needs T >= 1, delta >= 2 and samples >= 1 (T = {t_len}, delta = {delta}, samples = {samples})"
        )));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param(format!("geometric parameter must lie in (0, 1], got {q}")));
    }
    Ok(())
}

/// `samples` independent draws of the sum. Chunk `i` uses ChaCha stream `i`,
/// so the output does not depend on the thread count.
pub fn sample_sums(t_len: usize, delta: usize, q: f64, samples: usize, seed: u64) -> Result<Vec<u64>> {
    validate(t_len, delta, q, samples)?;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let len = CHUNK.min(samples - i * CHUNK);
            (0..len)
                .map(|_| (0..t_len).map(|_| (0..delta).map(|_| geometric(&mut rng, q)).max().unwrap()).sum())
                .collect()
        })
        .collect();
    Ok(parts.concat())
}

/// Threshold `C (T ln delta + t)`.
pub fn threshold(t_len: usize, delta: usize, c: f64, t: f64) -> f64 {
    c * (t_len as f64 * (delta as f64).ln() + t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailBoundSample {
    pub t_len: usize,
    pub delta: usize,
    pub q: f64,
    pub c: f64,
    pub samples: usize,
    pub t_grid: Vec<f64>,
    /// Empirical `P[sum >= threshold(t)]` for each `t` in the grid.
    pub exceedance: Vec<f64>,
    /// `exp(-t) + 4 sigma`, sigma the binomial deviation at `exp(-t)`.
    pub tolerance: Vec<f64>,
}

impl TailBoundSample {
    pub fn passes(&self) -> Vec<bool> {
        self.exceedance.iter().zip(&self.tolerance).map(|(e, tol)| e <= tol).collect()
    }

    pub fn passed(&self) -> bool {
        self.first_failure().is_none()
    }

    /// Smallest grid value of `t` whose exceedance is out of tolerance.
    pub fn first_failure(&self) -> Option<f64> {
        self.passes().iter().position(|ok| !ok).map(|i| self.t_grid[i])
    }
}

/// Empirical exceedances of a fixed sample for each `t`.
pub fn evaluate(sums: &[u64], t_len: usize, delta: usize, q: f64, c: f64, t_grid: &[f64]) -> TailBoundSample {
    let n = sums.len();
    let exceedance = t_grid
        .iter()
        .map(|&t| {
            let thr = threshold(t_len, delta, c, t);
            sums.iter().filter(|&&s| s as f64 >= thr).count() as f64 / n as f64
        })
        .collect();
    let tolerance = t_grid
        .iter()
        .map(|&t| {
            let bound = (-t).exp();
            bound + 4.0 * oracle::binomial_sigma(bound.min(1.0), n)
        })
        .collect();
    TailBoundSample {
        t_len,
        delta,
        q,
        c,
        samples: n,
        t_grid: t_grid.to_vec(),
        exceedance,
        tolerance,
    }
}

pub fn tail_bound_check(t_len: usize, delta: usize, q: f64, samples: usize, t_grid: &[f64], c: f64, seed: u64) -> Result<TailBoundSample> {
    let sums = sample_sums(t_len, delta, q, samples, seed)?;
    Ok(evaluate(&sums, t_len, delta, q, c, t_grid))
}

/// Exact exceedances by convolution of the maximum's distribution.
pub fn exact_exceedance(t_len: usize, delta: usize, q: f64, c: f64, t_grid: &[f64]) -> Vec<f64> {
    // Truncate each maximum where its tail drops below about 2^-60.
    let limit = if q >= 1.0 {
        2
    } else {
        let halvings = 1.0 / -(1.0 - q).log2();
        ((60.0 + (delta as f64).log2()) * halvings).ceil().min(5000.0) as usize
    };
    t_grid
        .iter()
        .map(|&t| oracle::sum_of_max_tail(t_len, delta, q, threshold(t_len, delta, c, t), limit))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Smallest passing grid value, if any.
    pub c: Option<f64>,
    pub tried: Vec<TailBoundSample>,
}

/// Smallest `C` in [`c_grid`] for which the check passes at the given point.
/// All candidates are evaluated on the same sample.
pub fn calibrate_c(t_len: usize, delta: usize, q: f64, samples: usize, t_grid: &[f64], seed: u64) -> Result<Calibration> {
    let sums = sample_sums(t_len, delta, q, samples, seed)?;
    let mut tried = Vec::new();
    for c in c_grid() {
        let s = evaluate(&sums, t_len, delta, q, c, t_grid);
        let ok = s.passed();
        tried.push(s);
        if ok {
            return Ok(Calibration { c: Some(c), tried });
        }
    }
    Ok(Calibration { c: None, tried })
}
