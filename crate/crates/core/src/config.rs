//! Named constants behind every asymptotic loop count.

use crate::error::{Error, Result};
use crate::model::DEFAULT_PAYLOAD_CAP;

/// `ceil(log2(x))` for `x >= 1`, and `0` for `x <= 1`.
pub fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// `max(1, ceil(log2 x))`: the clamped logarithm used in loop lengths.
pub fn lg(x: usize) -> usize {
    ceil_log2(x).max(1)
}

/// `max(1, ceil(ln x))`.
pub fn ln_ceil(x: usize) -> usize {
    ((x.max(1) as f64).ln().ceil() as usize).max(1)
}

/// `max(1, ceil(log2 max(2, log2 max(2, log2 n))))`.
pub fn logloglog(n: usize) -> usize {
    let l1 = (n.max(2) as f64).log2().max(2.0);
    let l2 = l1.log2().max(2.0);
    (l2.log2().ceil() as usize).max(1)
}

/// Tunable constants of the three simulators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConstants {
    /// Inner iterations of the static simulator per throttle step: `c1 * lg(Δ)`.
    pub c1: usize,
    /// Outer iterations of the Decay broadcast: `c3 * lg(Δ) * logloglog(n)`.
    pub c3: usize,
    /// Search window of the static simulator: `Q = cq * ceil(ln n)`.
    pub cq: usize,
    /// Knowledge-sharing length: `c4 * Δ * lg(Δ)` rounds.
    pub c4: usize,
    /// Iterations of the general simulator: `c5 * (T lg(Δ) + ceil(ln n))`.
    pub c5: usize,
    /// Round budget multiplier of the progress-detection simulator.
    pub progress_budget: usize,
    pub payload_cap: usize,
}

impl Default for SimConstants {
    fn default() -> Self {
        Self {
            c1: 4,
            c3: 4,
            cq: 8,
            c4: 6,
            c5: 8,
            progress_budget: 8,
            payload_cap: DEFAULT_PAYLOAD_CAP,
        }
    }
}

impl SimConstants {
    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parsed: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("constant {key} needs a non-negative integer, got {value:?}")))?;
        match key.trim() {
            "c1" => self.c1 = parsed,
            "c3" => self.c3 = parsed,
            "cQ" | "cq" => self.cq = parsed,
            "c4" => self.c4 = parsed,
            "c5" => self.c5 = parsed,
            "progress_budget" | "k" => self.progress_budget = parsed,
            "payload_cap" | "B" => self.payload_cap = parsed,
            other => return Err(Error::config(format!("unknown constant {other:?}"))),
        }
        Ok(())
    }

    /// Decay inner loop length `lg(Δ)`.
    pub fn decay_inner(&self, delta: usize) -> usize {
        lg(delta)
    }

    pub fn decay_outer(&self, delta: usize, n: usize) -> usize {
        self.c3 * lg(delta) * logloglog(n)
    }

    pub fn broadcast_rounds(&self, delta: usize, n: usize) -> usize {
        self.decay_outer(delta, n) * self.decay_inner(delta)
    }

    pub fn window(&self, n: usize) -> usize {
        (self.cq * ln_ceil(n)).max(1)
    }

    pub fn static_inner(&self, delta: usize) -> usize {
        self.c1 * lg(delta)
    }

    pub fn share_rounds(&self, delta: usize) -> usize {
        self.c4 * delta.max(1) * lg(delta)
    }

    pub fn general_iterations(&self, t: usize, delta: usize, n: usize) -> usize {
        self.c5 * (t * lg(delta) + ln_ceil(n))
    }

    pub fn progress_rounds(&self, t: usize, delta: usize, n: usize) -> usize {
        self.progress_budget * (t * lg(delta) + ln_ceil(n))
    }
}
