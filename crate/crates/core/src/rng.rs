//! Counter-based randomness.
//!
//! Every random draw in a run is a pure function of `(seed, stream, node, round)`.
//! Fault draws and protocol coins therefore do not depend on the order in
//! which the engine visits nodes, and any single draw can be re-derived after
//! the fact (the delay-recurrence checks rely on this).

/// Independent draw streams. Each consumer of randomness owns one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Receiver faults.
    Fault = 0x01,
    /// Coins of the Decay-style broadcast subroutine.
    Decay = 0x02,
    /// Coins of the knowledge-sharing subroutine.
    Share = 0x03,
    /// Public coins of simulated protocols.
    Protocol = 0x04,
    /// Private inputs generated from a seed.
    Input = 0x05,
}

/// SplitMix64-keyed counter generator.
///
/// The key and each counter component are folded in with the SplitMix64
/// finalizer, which is a bijection on `u64` with full avalanche.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix(seed.wrapping_add(GOLDEN)),
        }
    }

    #[inline]
    pub fn draw(&self, stream: Stream, node: usize, round: u64) -> u64 {
        let mut h = mix(self.key ^ (stream as u64).wrapping_mul(GOLDEN));
        h = mix(h.wrapping_add(node as u64).wrapping_mul(GOLDEN));
        mix(h ^ round.wrapping_mul(0xd6e8_feb8_6659_fd93))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn unit(&self, stream: Stream, node: usize, round: u64) -> f64 {
        (self.draw(stream, node, round) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&self, prob: f64, stream: Stream, node: usize, round: u64) -> bool {
        if prob <= 0.0 {
            return false;
        }
        if prob >= 1.0 {
            return true;
        }
        self.unit(stream, node, round) < prob
    }

    /// Coin with probability `2^-exponent`, exact for integer exponents.
    #[inline]
    pub fn dyadic(&self, exponent: u32, stream: Stream, node: usize, round: u64) -> bool {
        if exponent == 0 {
            return true;
        }
        if exponent >= 64 {
            return false;
        }
        self.draw(stream, node, round) >> (64 - exponent) == 0
    }
}
