use std::fmt::Write as _;

use crate::error::{invalid, Result};

const MAX_BINS: usize = 10_000;

/// How to place histogram bin edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Binning {
    /// Bin width `2 IQR n^(-1/3)` over the data range.
    #[default]
    FreedmanDiaconis,
    /// Fixed number of equal-width bins over the data range.
    Uniform(usize),
    /// One bin per possible Hamming distance of an `m`-bit key, on the
    /// fractional scale: edges at `(k - 0.5) / m`.
    Hamming(usize),
    /// Explicit, strictly increasing edges.
    Edges(Vec<f64>),
}

impl Binning {
    pub fn edges(&self, values: &[f64]) -> Result<Vec<f64>> {
        match self {
            Binning::FreedmanDiaconis => Ok(freedman_diaconis(values)),
            Binning::Uniform(bins) => {
                if *bins == 0 {
                    return Err(invalid("need at least one bin"));
                }
                let (lo, hi) = padded_range(values);
                Ok(even_edges(lo, hi, *bins))
            }
            Binning::Hamming(m) => {
                if *m == 0 {
                    return Err(invalid("key length must be positive"));
                }
                Ok((0..=*m + 1).map(|k| (k as f64 - 0.5) / *m as f64).collect())
            }
            Binning::Edges(e) => {
                if e.len() < 2
                    || e.windows(2)
                        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
                {
                    return Err(invalid("edges must be strictly increasing, at least two"));
                }
                Ok(e.clone())
            }
        }
    }
}

/// Freedman-Diaconis edges over the pooled values of several samples, so
/// their histograms can be compared bin by bin.
pub fn joint_edges(samples: &[&[f64]]) -> Vec<f64> {
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
    freedman_diaconis(&pooled)
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn freedman_diaconis(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = padded_range(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let n = sorted.len().max(1) as f64;
    let width = 2.0 * iqr / n.cbrt();
    let bins = if width > 0.0 {
        (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        (n.sqrt().ceil() as usize).clamp(1, MAX_BINS)
    };
    even_edges(lo, hi, bins)
}

/// `bins + 1` equally spaced edges whose last one is exactly `hi`.
fn even_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + w * k as f64).collect();
    edges.push(hi);
    edges
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins are half-open `[e_k, e_k+1)` except the last, which is closed.
    /// Values outside the edges are not counted.
    pub fn from_edges(values: &[f64], edges: Vec<f64>) -> Self {
        let bins = edges.len() - 1;
        let mut counts = vec![0u64; bins];
        let (lo, hi) = (edges[0], edges[bins]);
        for &v in values {
            if !(lo..=hi).contains(&v) {
                continue;
            }
            let k = edges
                .partition_point(|&e| e <= v)
                .saturating_sub(1)
                .min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts divided by the total.
    pub fn masses(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }
}

/// Distances between pairs of a dataset with summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub values: Vec<f64>,
    pub histogram: Histogram,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl DistanceReport {
    pub fn new(values: Vec<f64>, binning: &Binning) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("a report needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("report values must be finite"));
        }
        let edges = binning.edges(&values)?;
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let histogram = Histogram::from_edges(&values, edges);
        Ok(Self {
            values,
            histogram,
            mean,
            std,
        })
    }

    /// Same values on new bin edges.
    pub fn rebin(&self, binning: &Binning) -> Result<Self> {
        Self::new(self.values.clone(), binning)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `lo,hi,count,mass` rows, with a header line.
    pub fn histogram_table(&self) -> String {
        let mut s = String::from("lo,hi,count,mass\n");
        let h = &self.histogram;
        for (k, (c, m)) in h.counts.iter().zip(h.masses()).enumerate() {
            let _ = writeln!(s, "{},{},{},{}", h.edges[k], h.edges[k + 1], c, m);
        }
        s
    }

    /// One value per line, with a header line.
    pub fn values_table(&self) -> String {
        let mut s = String::from("value\n");
        for v in &self.values {
            let _ = writeln!(s, "{v}");
        }
        s
    }
}

/// Overlap coefficient of two reports: sum over bins of the smaller
/// normalized mass. Both reports must use identical edges.
pub fn overlap(a: &DistanceReport, b: &DistanceReport) -> Result<f64> {
    if a.histogram.edges != b.histogram.edges {
        return Err(invalid(
            "reports use different bin edges; rebin them jointly first",
        ));
    }
    Ok(a.histogram
        .masses()
        .iter()
        .zip(b.histogram.masses())
        .map(|(x, y)| x.min(y))
        .sum())
}

/// Rebins both reports on shared Freedman-Diaconis edges, then overlaps them.
pub fn joint_overlap(a: &DistanceReport, b: &DistanceReport) -> Result<f64> {
    let edges = Binning::Edges(joint_edges(&[&a.values, &b.values]));
    overlap(&a.rebin(&edges)?, &b.rebin(&edges)?)
}
