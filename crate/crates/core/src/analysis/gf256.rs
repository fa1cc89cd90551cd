//! Arithmetic in GF(2^8) modulo `x^8 + x^4 + x^3 + x^2 + 1` and incremental
//! rank tracking for random linear coding.

use std::sync::OnceLock;

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
    mul: Vec<[u8; 256]>,
    /// `nibbles[c] = (c * i, c * (i << 4))` for `i < 16`.
    nibbles: Vec<([u8; 16], [u8; 16])>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u16 = 1;
        for i in 0..255 {
            exp[i] = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & 0x100 != 0 {
                x ^= 0x11d;
            }
        }
        for i in 255..512 {
            exp[i] = exp[i - 255];
        }
        let mut mul = vec![[0u8; 256]; 256];
        for a in 1..256 {
            for b in 1..256 {
                mul[a][b] = exp[log[a] as usize + log[b] as usize];
            }
        }
        let nibbles = (0..256)
            .map(|c| {
                let mut lo = [0u8; 16];
                let mut hi = [0u8; 16];
                for i in 0..16 {
                    lo[i] = mul[c][i];
                    hi[i] = mul[c][i << 4];
                }
                (lo, hi)
            })
            .collect();
        Tables { exp, log, mul, nibbles }
    })
}

pub fn mul(a: u8, b: u8) -> u8 {
    tables().mul[a as usize][b as usize]
}

pub fn inv(a: u8) -> u8 {
    assert!(a != 0, "zero has no inverse");
    let t = tables();
    t.exp[255 - t.log[a as usize] as usize]
}

/// `dst += c * src` over GF(256), element-wise.
pub fn axpy(dst: &mut [u8], c: u8, src: &[u8]) {
    if c == 0 {
        return;
    }
    let len = dst.len().min(src.len());
    let mut done = 0;
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("ssse3") {
        let (lo, hi) = &tables().nibbles[c as usize];
        done = len - len % 16;
        // SAFETY: the feature was detected at runtime and the slices hold at
        // least `done` bytes.
        unsafe { simd::axpy16(&mut dst[..done], lo, hi, &src[..done]) };
    }
    axpy_scalar(&mut dst[done..len], c, &src[done..len]);
}

fn axpy_scalar(dst: &mut [u8], c: u8, src: &[u8]) {
    let row = &tables().mul[c as usize];
    for (d, &s) in dst.iter_mut().zip(src) {
        *d ^= row[s as usize];
    }
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use std::arch::x86_64::*;

    /// Split-nibble table multiply, 16 bytes per step. Lengths must be equal
    /// multiples of 16.
    #[target_feature(enable = "ssse3")]
    pub unsafe fn axpy16(dst: &mut [u8], lo: &[u8; 16], hi: &[u8; 16], src: &[u8]) {
        let lo = _mm_loadu_si128(lo.as_ptr().cast());
        let hi = _mm_loadu_si128(hi.as_ptr().cast());
        let mask = _mm_set1_epi8(0x0f);
        for (d, s) in dst.chunks_exact_mut(16).zip(src.chunks_exact(16)) {
            let x = _mm_loadu_si128(s.as_ptr().cast());
            let l = _mm_shuffle_epi8(lo, _mm_and_si128(x, mask));
            let h = _mm_shuffle_epi8(hi, _mm_and_si128(_mm_srli_epi64(x, 4), mask));
            let y = _mm_loadu_si128(d.as_ptr().cast());
            let r = _mm_xor_si128(y, _mm_xor_si128(l, h));
            _mm_storeu_si128(d.as_mut_ptr().cast(), r);
        }
    }
}

pub fn scale(v: &mut [u8], c: u8) {
    let row = &tables().mul[c as usize];
    for x in v.iter_mut() {
        *x = row[*x as usize];
    }
}

/// Row-echelon basis of the span of the vectors seen so far.
#[derive(Clone, Debug)]
pub struct RankTracker {
    dim: usize,
    /// `pivots[j]` holds the basis row whose leading 1 is in column `j`.
    pivots: Vec<Option<Vec<u8>>>,
    rank: usize,
    scratch: Vec<u8>,
}

impl RankTracker {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            pivots: vec![None; dim],
            rank: 0,
            scratch: vec![0; dim],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full(&self) -> bool {
        self.rank == self.dim
    }

    /// Adds a vector; returns whether the rank grew.
    pub fn insert(&mut self, v: &[u8]) -> bool {
        assert_eq!(v.len(), self.dim);
        if self.is_full() {
            return false;
        }
        self.scratch.copy_from_slice(v);
        for j in 0..self.dim {
            let c = self.scratch[j];
            if c == 0 {
                continue;
            }
            match &self.pivots[j] {
                // Both rows vanish left of `j`, so starting at an aligned
                // column is equivalent and keeps the vector path busy.
                Some(row) => {
                    let from = j & !15;
                    axpy(&mut self.scratch[from..], c, &row[from..])
                }
                None => {
                    let mut row = self.scratch.clone();
                    scale(&mut row[j..], inv(c));
                    self.pivots[j] = Some(row);
                    self.rank += 1;
                    return true;
                }
            }
        }
        false
    }
}

/// Rank by plain Gaussian elimination on a copy of `rows`.
pub fn rank_of(rows: &[Vec<u8>]) -> usize {
    let mut m: Vec<Vec<u8>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let f = inv(m[rank][c]);
        scale(&mut m[rank], f);
        let pivot = m[rank].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != rank && row[c] != 0 {
                let k = row[c];
                axpy(row, k, &pivot);
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Carry-less multiply then reduce, bit by bit.
    fn slow_mul(mut a: u8, mut b: u8) -> u8 {
        let mut p = 0u8;
        while b != 0 {
            if b & 1 != 0 {
                p ^= a;
            }
            let carry = a & 0x80 != 0;
            a <<= 1;
            if carry {
                a ^= 0x1d;
            }
            b >>= 1;
        }
        p
    }

    #[test]
    fn field_axioms() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(mul(a, b), slow_mul(a, b));
            }
            if a != 0 {
                assert_eq!(mul(a, inv(a)), 1);
            }
        }
    }

    #[test]
    fn vector_axpy_matches_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for len in [0usize, 5, 16, 37, 256] {
            for _ in 0..20 {
                let c: u8 = rng.gen();
                let src: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                let mut a: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                let mut b = a.clone();
                axpy(&mut a, c, &src);
                axpy_scalar(&mut b, c, &src);
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn tracker_matches_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [1usize, 3, 8] {
            for _ in 0..50 {
                let mut t = RankTracker::new(dim);
                let mut rows = Vec::new();
                for _ in 0..dim + 2 {
                    // Sparse entries make dependent rows common.
                    let v: Vec<u8> = (0..dim).map(|_| if rng.gen_bool(0.3) { rng.gen() } else { 0 }).collect();
                    t.insert(&v);
                    rows.push(v);
                    assert_eq!(t.rank(), rank_of(&rows));
                }
            }
        }
    }

    #[test]
    fn dependent_rows_do_not_grow_rank() {
        let mut t = RankTracker::new(3);
        assert!(t.insert(&[1, 2, 3]));
        assert!(!t.insert(&[mul(7, 1), mul(7, 2), mul(7, 3)]));
        assert!(!t.insert(&[0, 0, 0]));
        assert!(t.insert(&[0, 1, 0]));
        assert_eq!(t.rank(), 2);
    }
}
