//! Random bits from speckle, and a statistical test battery to check them.

pub mod nist;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rustfft::FftPlanner;

use crate::bits::{pack_bits, unpack_bits};
use crate::error::{invalid, Error, Result};
use crate::hashing::standardize;
use crate::seed::derive_rng;
use crate::token::{Dims, SpeckleImage};

/// Significance level of every test.
pub const ALPHA: f64 = 0.01;
/// Uniformity p-values below this fail.
pub const UNIFORMITY_THRESHOLD: f64 = 0.0001;

#[derive(Clone, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
}

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("bit stream must be non-empty"));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("bit values must be 0 or 1"));
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Splits into consecutive streams of `len` bits, dropping any remainder.
    pub fn chunks(&self, len: usize) -> Result<Vec<BitStream>> {
        if len == 0 || len > self.len() {
            return Err(invalid("chunk length must lie in 1..=stream length"));
        }
        Ok(self
            .bits
            .chunks_exact(len)
            .map(|c| BitStream { bits: c.to_vec() })
            .collect())
    }

    /// ASCII `0`/`1`, one character per bit.
    pub fn to_ascii(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect()
    }

    /// Parses ASCII `0`/`1`, ignoring whitespace.
    pub fn from_ascii(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(invalid(format!("unexpected character {c:?} in bit stream"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }

    pub fn pack(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }

    pub fn unpack(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(invalid("not enough bytes for the requested length"));
        }
        Self::new(unpack_bits(bytes, len))
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitStream({} bits)", self.len())
    }
}

/// Distinct spectral components an image of `dims` offers: real and
/// imaginary parts of the frequencies in `[1, (N-1)/2]`.
pub fn max_bits_per_image(dims: Dims) -> usize {
    2 * ((dims.len() - 1) / 2)
}

/// Random bits from each image, concatenated in image order.
///
/// The standardized image is multiplied by random signs and transformed.
/// One half of the spectrum holds every independent component of a real
/// input, so each bit is the sign of a distinct real or imaginary part from
/// that half, chosen without replacement. Signs and choices are seeded from
/// `(seed, image index)`.
pub fn extract_bits(
    images: &[SpeckleImage],
    seed: u64,
    bits_per_image: usize,
) -> Result<BitStream> {
    if images.is_empty() || bits_per_image == 0 {
        return Err(invalid("need at least one image and one bit per image"));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut out = Vec::with_capacity(images.len() * bits_per_image);
    for (i, image) in images.iter().enumerate() {
        let available = max_bits_per_image(image.dims());
        if bits_per_image > available {
            return Err(invalid(format!(
                "a {} image yields at most {available} bits",
                image.dims()
            )));
        }
        let y = standardize(image)?;
        let mut rng = derive_rng("extract", &[seed, i as u64]);
        let mut buf: Vec<Complex64> = y
            .iter()
            .map(|&v| Complex64::new(if rng.random::<bool>() { v } else { -v }, 0.0))
            .collect();
        planner.plan_fft_forward(buf.len()).process(&mut buf);
        for c in index::sample(&mut rng, available, bits_per_image) {
            let z = buf[1 + c / 2];
            let part = if c % 2 == 0 { z.re } else { z.im };
            out.push(u8::from(part >= 0.0));
        }
    }
    BitStream::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestId {
    Frequency,
    BlockFrequency,
    CumulativeSums,
    Runs,
    LongestRun,
    Rank,
    Fft,
    NonOverlappingTemplate,
    OverlappingTemplate,
    Universal,
    ApproximateEntropy,
    RandomExcursions,
    RandomExcursionsVariant,
    Serial,
    LinearComplexity,
}

impl TestId {
    /// The tests this crate implements.
    pub const IMPLEMENTED: [TestId; 8] = [
        TestId::Frequency,
        TestId::BlockFrequency,
        TestId::CumulativeSums,
        TestId::Runs,
        TestId::LongestRun,
        TestId::Fft,
        TestId::ApproximateEntropy,
        TestId::Serial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestId::Frequency => "Frequency",
            TestId::BlockFrequency => "BlockFrequency",
            TestId::CumulativeSums => "CumulativeSums",
            TestId::Runs => "Runs",
            TestId::LongestRun => "LongestRun",
            TestId::Rank => "Rank",
            TestId::Fft => "FFT",
            TestId::NonOverlappingTemplate => "NonOverlappingTemplate",
            TestId::OverlappingTemplate => "OverlappingTemplate",
            TestId::Universal => "Universal",
            TestId::ApproximateEntropy => "ApproximateEntropy",
            TestId::RandomExcursions => "RandomExcursions",
            TestId::RandomExcursionsVariant => "RandomExcursionsVariant",
            TestId::Serial => "Serial",
            TestId::LinearComplexity => "LinearComplexity",
        }
    }

    const ALL: [TestId; 15] = [
        TestId::Frequency,
        TestId::BlockFrequency,
        TestId::CumulativeSums,
        TestId::Runs,
        TestId::LongestRun,
        TestId::Rank,
        TestId::Fft,
        TestId::NonOverlappingTemplate,
        TestId::OverlappingTemplate,
        TestId::Universal,
        TestId::ApproximateEntropy,
        TestId::RandomExcursions,
        TestId::RandomExcursionsVariant,
        TestId::Serial,
        TestId::LinearComplexity,
    ];
}

impl FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        TestId::ALL
            .into_iter()
            .find(|t| t.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "dft" | "spectral" => Some(TestId::Fft),
                "cusum" => Some(TestId::CumulativeSums),
                "apen" => Some(TestId::ApproximateEntropy),
                "monobit" => Some(TestId::Frequency),
                _ => None,
            })
            .ok_or_else(|| invalid(format!("unknown test {s:?}")))
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional overrides; `None` picks a value from the stream length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TestParams {
    pub block_len: Option<usize>,
    pub apen_m: Option<usize>,
    pub serial_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub id: TestId,
    /// Smallest p-value among the parts.
    pub p_value: f64,
    /// True when every part passes at [`ALPHA`].
    pub pass: bool,
    /// Named parts, for tests that report more than one p-value.
    pub parts: Vec<(String, f64)>,
}

impl TestResult {
    fn from_parts(id: TestId, parts: Vec<(String, f64)>) -> Self {
        let p_value = parts.iter().map(|p| p.1).fold(1.0, f64::min);
        Self {
            id,
            p_value,
            pass: p_value >= ALPHA,
            parts,
        }
    }
}

fn log2_floor(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

fn require(n: usize, min: usize, id: TestId) -> Result<()> {
    if n < min {
        return Err(invalid(format!(
            "{id} needs at least {min} bits, stream has {n}"
        )));
    }
    Ok(())
}

pub fn nist_test(stream: &BitStream, id: TestId, params: &TestParams) -> Result<TestResult> {
    let bits = stream.bits();
    let n = bits.len();
    let one = |p: f64| vec![(id.name().to_string(), p)];
    let parts = match id {
        TestId::Frequency => {
            require(n, 100, id)?;
            one(nist::frequency(bits))
        }
        TestId::BlockFrequency => {
            require(n, 100, id)?;
            let m = params.block_len.unwrap_or_else(|| 20.max(n.div_ceil(99)));
            if m == 0 || m > n {
                return Err(invalid("block length must lie in 1..=n"));
            }
            one(nist::block_frequency(bits, m))
        }
        TestId::CumulativeSums => {
            require(n, 100, id)?;
            vec![
                (
                    "CumulativeSums-forward".into(),
                    nist::cumulative_sums(bits, false),
                ),
                (
                    "CumulativeSums-backward".into(),
                    nist::cumulative_sums(bits, true),
                ),
            ]
        }
        TestId::Runs => {
            require(n, 100, id)?;
            one(nist::runs(bits))
        }
        TestId::LongestRun => {
            require(n, 128, id)?;
            one(nist::longest_run(bits).expect("length checked"))
        }
        TestId::Fft => {
            require(n, 1000, id)?;
            one(nist::dft(bits))
        }
        TestId::ApproximateEntropy => {
            require(n, 128, id)?;
            let max_m = log2_floor(n) - 6;
            let m = params.apen_m.unwrap_or(max_m.min(10));
            if m == 0 || m > max_m {
                return Err(invalid(format!(
                    "ApEn block length must lie in 1..={max_m} for n = {n}"
                )));
            }
            one(nist::approximate_entropy(bits, m))
        }
        TestId::Serial => {
            require(n, 128, id)?;
            let max_m = log2_floor(n) - 3;
            let m = params.serial_m.unwrap_or((log2_floor(n) - 5).min(16));
            if m < 2 || m > max_m {
                return Err(invalid(format!(
                    "serial block length must lie in 2..={max_m} for n = {n}"
                )));
            }
            let (p1, p2) = nist::serial(bits, m);
            vec![("Serial-1".into(), p1), ("Serial-2".into(), p2)]
        }
        other => {
            return Err(Error::Unsupported(format!(
                "test {other} is not implemented"
            )));
        }
    };
    Ok(TestResult::from_parts(id, parts))
}

/// One row per test part, across all streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    pub proportion: f64,
    pub band: (f64, f64),
    pub uniformity_p: f64,
    /// Counts of p-values in ten equal bins over `[0, 1]`.
    pub histogram: [usize; 10],
}

impl SuiteRow {
    pub fn proportion_ok(&self) -> bool {
        self.proportion >= self.band.0 && self.proportion <= self.band.1
    }

    pub fn uniformity_ok(&self) -> bool {
        self.uniformity_p >= UNIFORMITY_THRESHOLD
    }

    pub fn ok(&self) -> bool {
        self.proportion_ok() && self.uniformity_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub streams: usize,
}

impl SuiteReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(SuiteRow::ok)
    }

    /// `test,passed,total,proportion,band_lo,band_hi,uniformity_p,ok` rows.
    pub fn table(&self) -> String {
        let mut s = String::from("test,passed,total,proportion,band_lo,band_hi,uniformity_p,ok\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4},{:.6},{}\n",
                r.name,
                r.passed,
                r.total,
                r.proportion,
                r.band.0,
                r.band.1,
                r.uniformity_p,
                r.ok()
            ));
        }
        s
    }
}

/// Acceptance band for the pass proportion over `s` streams.
pub fn proportion_band(s: usize) -> (f64, f64) {
    let p = 1.0 - ALPHA;
    let half = 3.0 * (p * (1.0 - p) / s as f64).sqrt();
    (p - half, (p + half).min(1.0))
}

/// Chi-square of p-values over ten equal bins, as a p-value.
pub fn uniformity(p_values: &[f64]) -> (f64, [usize; 10]) {
    let mut bins = [0usize; 10];
    for &p in p_values {
        bins[((p * 10.0).floor() as usize).min(9)] += 1;
    }
    let expected = p_values.len() as f64 / 10.0;
    let chi2: f64 = bins
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    (nist::igamc(4.5, chi2 / 2.0), bins)
}

/// Runs each test on every stream and summarises pass proportion and
/// p-value uniformity per test part.
pub fn suite_report(
    streams: &[BitStream],
    tests: &[TestId],
    params: &TestParams,
) -> Result<SuiteReport> {
    if streams.is_empty() {
        return Err(invalid("no streams to test"));
    }
    let mut rows = Vec::new();
    for &id in tests {
        let results = streams
            .iter()
            .map(|s| nist_test(s, id, params))
            .collect::<Result<Vec<_>>>()?;
        for (k, (name, _)) in results[0].parts.iter().enumerate() {
            let ps: Vec<f64> = results.iter().map(|r| r.parts[k].1).collect();
            let passed = ps.iter().filter(|&&p| p >= ALPHA).count();
            let (uniformity_p, histogram) = uniformity(&ps);
            rows.push(SuiteRow {
                name: name.clone(),
                passed,
                total: ps.len(),
                proportion: passed as f64 / ps.len() as f64,
                band: proportion_band(ps.len()),
                uniformity_p,
                histogram,
            });
        }
    }
    Ok(SuiteReport {
        rows,
        streams: streams.len(),
    })
}
