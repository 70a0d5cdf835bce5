//! Statistic definitions of eight tests from the SP 800-22 battery.
//!
//! Each function computes p-values for a bit slice without checking the
//! recommended minimum lengths; [`super::nist_test`] enforces those.

use num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::erf::erfc;
use statrs::function::gamma::checked_gamma_ur;

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    checked_gamma_ur(a, x).unwrap_or(0.0).clamp(0.0, 1.0)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn ones(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b == 1).count()
}

pub fn frequency(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let s = 2.0 * ones(bits) as f64 - n;
    erfc(s.abs() / n.sqrt() / std::f64::consts::SQRT_2)
}

pub fn block_frequency(bits: &[u8], m: usize) -> f64 {
    let blocks = bits.len() / m;
    let chi2: f64 = bits
        .chunks_exact(m)
        .take(blocks)
        .map(|b| {
            let pi = ones(b) as f64 / m as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    igamc(blocks as f64 / 2.0, chi2 / 2.0)
}

/// Forward when `reverse` is false.
pub fn cumulative_sums(bits: &[u8], reverse: bool) -> f64 {
    let n = bits.len() as i64;
    let mut s = 0i64;
    let mut z = 0i64;
    let step = |b: &u8| if *b == 1 { 1 } else { -1 };
    if reverse {
        for b in bits.iter().rev() {
            s += step(b);
            z = z.max(s.abs());
        }
    } else {
        for b in bits {
            s += step(b);
            z = z.max(s.abs());
        }
    }
    if z == 0 {
        return 1.0;
    }
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    let mut sum1 = 0.0;
    // Integer bounds use truncating division, as in the reference code.
    for k in ((-n / z + 1) / 4)..=((n / z - 1) / 4) {
        let k = k as f64;
        sum1 +=
            normal_cdf((4.0 * k + 1.0) * zf / sqrt_n) - normal_cdf((4.0 * k - 1.0) * zf / sqrt_n);
    }
    let mut sum2 = 0.0;
    for k in ((-n / z - 3) / 4)..=((n / z - 1) / 4) {
        let k = k as f64;
        sum2 +=
            normal_cdf((4.0 * k + 3.0) * zf / sqrt_n) - normal_cdf((4.0 * k + 1.0) * zf / sqrt_n);
    }
    (1.0 - sum1 + sum2).clamp(0.0, 1.0)
}

/// Returns 0 when the frequency prerequisite fails.
pub fn runs(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let pi = ones(bits) as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return 0.0;
    }
    let v = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let expected = 2.0 * n * pi * (1.0 - pi);
    erfc((v as f64 - expected).abs() / (2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi)))
}

/// Block length, class bounds and class probabilities for one length range.
struct LongestRunTable {
    m: usize,
    lo: usize,
    probs: &'static [f64],
}

fn longest_run_table(n: usize) -> Option<LongestRunTable> {
    if n >= 750_000 {
        Some(LongestRunTable {
            m: 10_000,
            lo: 10,
            probs: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
        })
    } else if n >= 6272 {
        Some(LongestRunTable {
            m: 128,
            lo: 4,
            probs: &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124],
        })
    } else if n >= 128 {
        Some(LongestRunTable {
            m: 8,
            lo: 1,
            probs: &[0.2148, 0.3672, 0.2305, 0.1875],
        })
    } else {
        None
    }
}

/// `None` when the stream is shorter than 128 bits.
pub fn longest_run(bits: &[u8]) -> Option<f64> {
    let table = longest_run_table(bits.len())?;
    let k = table.probs.len() - 1;
    let blocks = bits.len() / table.m;
    let mut nu = vec![0f64; k + 1];
    for block in bits.chunks_exact(table.m).take(blocks) {
        let (mut run, mut best) = (0usize, 0usize);
        for &b in block {
            run = if b == 1 { run + 1 } else { 0 };
            best = best.max(run);
        }
        let class = best.clamp(table.lo, table.lo + k) - table.lo;
        nu[class] += 1.0;
    }
    let nf = blocks as f64;
    let chi2: f64 = nu
        .iter()
        .zip(table.probs)
        .map(|(v, p)| (v - nf * p).powi(2) / (nf * p))
        .sum();
    Some(igamc(k as f64 / 2.0, chi2 / 2.0))
}

/// Spectral test with the revised threshold `sqrt(ln(1/0.05) n)`.
pub fn dft(bits: &[u8]) -> f64 {
    let n = bits.len();
    let mut x: Vec<Complex64> = bits
        .iter()
        .map(|&b| Complex64::new(if b == 1 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut x);
    let nf = n as f64;
    let threshold = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let n0 = 0.95 * nf / 2.0;
    let n1 = x[..n / 2].iter().filter(|z| z.norm() < threshold).count() as f64;
    let d = (n1 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    erfc(d.abs() / std::f64::consts::SQRT_2)
}

/// Counts of each overlapping `m`-bit pattern, wrapping around the end.
fn pattern_counts(bits: &[u8], m: usize) -> Vec<u64> {
    let n = bits.len();
    let mut counts = vec![0u64; 1 << m];
    if m == 0 {
        counts[0] = n as u64;
        return counts;
    }
    let mask = (1usize << m) - 1;
    let mut v = 0usize;
    for i in 0..m - 1 {
        v = (v << 1) | bits[i % n] as usize;
    }
    for i in 0..n {
        v = ((v << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[v] += 1;
    }
    counts
}

pub fn approximate_entropy(bits: &[u8], m: usize) -> f64 {
    let n = bits.len() as f64;
    let phi = |len: usize| -> f64 {
        pattern_counts(bits, len)
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum()
    };
    let apen = phi(m) - phi(m + 1);
    let chi2 = 2.0 * n * (std::f64::consts::LN_2 - apen);
    igamc((1u64 << m) as f64 / 2.0, chi2 / 2.0)
}

/// Returns `(p1, p2)`. Requires `m >= 2`.
pub fn serial(bits: &[u8], m: usize) -> (f64, f64) {
    let n = bits.len() as f64;
    let psi2 = |len: usize| -> f64 {
        if len == 0 {
            return 0.0;
        }
        let sum: f64 = pattern_counts(bits, len)
            .iter()
            .map(|&c| (c as f64).powi(2))
            .sum();
        (1u64 << len) as f64 / n * sum - n
    };
    let (a, b, c) = (psi2(m), psi2(m - 1), psi2(m.saturating_sub(2)));
    let d1 = a - b;
    let d2 = a - 2.0 * b + c;
    let p1 = igamc((1u64 << (m - 1)) as f64 / 2.0, d1 / 2.0);
    let p2 = igamc((1u64 << m) as f64 / 8.0, d2 / 2.0);
    (p1, p2)
}
