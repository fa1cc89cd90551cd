//! Exact reference values, written for clarity rather than speed.

/// `P(max of delta iid Geometric(q) <= k)`, support `{1, 2, ...}`.
pub fn max_geometric_cdf(delta: usize, q: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    (1.0 - (1.0 - q).powf(k as f64)).powf(delta as f64)
}

/// `E[max of delta iid Geometric(q)] = sum_{k >= 0} P(max > k)`.
pub fn expected_max_geometric(delta: usize, q: f64) -> f64 {
    if delta == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 0.. {
        let tail = 1.0 - max_geometric_cdf(delta, q, k);
        sum += tail;
        if tail < 1e-17 || k > 100_000 {
            break;
        }
    }
    sum
}

/// Median of the maximum: smallest `k` with `P(max <= k) >= 1/2`.
pub fn median_max_geometric(delta: usize, q: f64) -> u64 {
    (1..).find(|&k| max_geometric_cdf(delta, q, k) >= 0.5).unwrap()
}

/// Probability mass function of the maximum on `0..=limit`.
pub fn max_geometric_pmf(delta: usize, q: f64, limit: usize) -> Vec<f64> {
    (0..=limit as u64)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                max_geometric_cdf(delta, q, k) - max_geometric_cdf(delta, q, k - 1)
            }
        })
        .collect()
}

/// `P(sum of count iid maxima >= threshold)` by convolution, truncating each
/// maximum at `limit` (the neglected mass is added to the tail).
pub fn sum_of_max_tail(count: usize, delta: usize, q: f64, threshold: f64, limit: usize) -> f64 {
    let pmf = max_geometric_pmf(delta, q, limit);
    let lost = 1.0 - pmf.iter().sum::<f64>();
    let mut dist = vec![1.0];
    for _ in 0..count {
        let mut next = vec![0.0; dist.len() + limit];
        for (a, &pa) in dist.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (b, &pb) in pmf.iter().enumerate() {
                next[a + b] += pa * pb;
            }
        }
        dist = next;
    }
    let tail: f64 = dist
        .iter()
        .enumerate()
        .filter(|&(s, _)| s as f64 >= threshold)
        .map(|(_, &p)| p)
        .sum();
    (tail + count as f64 * lost).min(1.0)
}

/// Probability that `rows` uniform vectors in `GF(q)^cols` span the space
/// (`rows >= cols`).
pub fn full_rank_probability(rows: usize, cols: usize, field: f64) -> f64 {
    if rows < cols {
        return 0.0;
    }
    let extra = rows - cols;
    (extra + 1..=rows).map(|k| 1.0 - field.powi(-(k as i32))).product()
}

/// Probability that a uniform square matrix over `GF(q)` is singular.
pub fn singular_probability(dim: usize, field: f64) -> f64 {
    1.0 - full_rank_probability(dim, dim, field)
}

/// Expected number of rows beyond `dim` drawn before `dim` uniform random
/// rows over `GF(q)` span the space.
pub fn expected_extra_rows(dim: usize, field: f64) -> f64 {
    (0..)
        .map(|j| 1.0 - full_rank_probability(dim + j, dim, field))
        .take_while(|&x| x > 1e-18)
        .take(10_000)
        .sum()
}

/// Binomial standard deviation of a frequency estimate.
pub fn binomial_sigma(prob: f64, trials: usize) -> f64 {
    (prob * (1.0 - prob) / trials as f64).sqrt()
}

/// `P(Binomial(n, prob) <= k)`, summed in log space.
pub fn binomial_cdf(n: u64, prob: f64, k: u64) -> f64 {
    if k >= n {
        return 1.0;
    }
    let ln_p = prob.ln();
    let ln_q = (1.0 - prob).ln();
    let mut ln_choose = 0.0;
    let mut sum = 0.0;
    for i in 0..=k {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        sum += (ln_choose + i as f64 * ln_p + (n - i) as f64 * ln_q).exp();
    }
    sum.min(1.0)
}

/// `P(Geometric(q) > k) = (1 - q)^k`.
pub fn geometric_tail(q: f64, k: u64) -> f64 {
    (1.0 - q).powf(k as f64)
}
