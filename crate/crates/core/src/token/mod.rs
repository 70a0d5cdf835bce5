//! Simulated scattering token.
//!
//! The medium is a complex transmission tensor `f[i][q]` mapping every
//! challenge pixel `i` to every output pixel `q`. A pixel challenge sums the
//! fields of the pixels that are switched on; the camera records `|E|^2`.

mod challenge;
mod image;
mod noise;

use std::path::Path;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::codec::Reader;
use crate::error::{invalid, FormatError, Result};
use crate::seed::derive_rng;

pub use challenge::{Challenge, PixelMask, WAVELENGTH_MAX_NM, WAVELENGTH_MIN_NM};
pub use image::SpeckleImage;
pub use noise::{NoiseParams, DEFAULT_DRIFT_COEFF};

pub(crate) use challenge::check_wavelength;

/// Bit depth of simulated captures.
pub const BIT_DEPTH: u8 = 8;
/// Mean grey level of a capture, as a fraction of full scale.
pub const MEAN_LEVEL: f64 = 40.0 / 255.0;

const DESCRIPTOR_MAGIC: &str = "PUFT";
const DESCRIPTOR_VERSION: u16 = 1;
/// Innovations kept when evaluating a wavelength knot.
const KNOT_WINDOW: u64 = 48;

/// Rows and columns of a pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
}

impl Dims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if rows > u32::MAX as usize || cols > u32::MAX as usize {
            return Err(invalid("dimension does not fit in 32 bits"));
        }
        Ok(Self { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Ground-glass diffuser: slow spectral decorrelation.
    Diffuser,
    /// Polymer optical fibre: fast spectral decorrelation.
    Pof,
}

impl TokenKind {
    /// Spectral decorrelation length in picometres.
    pub fn default_decorrelation_pm(self) -> f64 {
        match self {
            TokenKind::Diffuser => 2000.0,
            TokenKind::Pof => 100.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            TokenKind::Diffuser => 0,
            TokenKind::Pof => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TokenKind::Diffuser),
            1 => Some(TokenKind::Pof),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TokenKind::Diffuser => "diffuser",
            TokenKind::Pof => "pof",
        }
    }
}

impl std::str::FromStr for TokenKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "diffuser" => Ok(TokenKind::Diffuser),
            "pof" | "fiber" | "fibre" => Ok(TokenKind::Pof),
            _ => Err(invalid(format!("unknown token kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for TokenKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A simulated token. Immutable; tensor rows are generated on first use.
#[derive(Debug)]
pub struct TokenModel {
    seed: u64,
    kind: TokenKind,
    grid: Dims,
    out: Dims,
    decorrelation_pm: f64,
    rows: Vec<OnceLock<Vec<Complex64>>>,
    full_field: OnceLock<Vec<Complex64>>,
}

impl Clone for TokenModel {
    fn clone(&self) -> Self {
        Self {
            seed: self.seed,
            kind: self.kind,
            grid: self.grid,
            out: self.out,
            decorrelation_pm: self.decorrelation_pm,
            rows: self.rows.clone(),
            full_field: self.full_field.clone(),
        }
    }
}

impl PartialEq for TokenModel {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.kind == other.kind
            && self.grid == other.grid
            && self.out == other.out
            && self.decorrelation_pm.to_bits() == other.decorrelation_pm.to_bits()
    }
}

impl TokenModel {
    pub fn new(
        seed: u64,
        kind: TokenKind,
        grid: Dims,
        out: Dims,
        decorrelation_pm: f64,
    ) -> Result<Self> {
        if !(decorrelation_pm.is_finite() && decorrelation_pm > 0.0) {
            return Err(invalid("decorrelation length must be positive"));
        }
        // Re-validate in case the caller built Dims by hand.
        let grid = Dims::new(grid.rows, grid.cols)?;
        let out = Dims::new(out.rows, out.cols)?;
        Ok(Self {
            seed,
            kind,
            grid,
            out,
            decorrelation_pm,
            rows: (0..grid.len()).map(|_| OnceLock::new()).collect(),
            full_field: OnceLock::new(),
        })
    }

    /// 16x16 challenge grid, 128x128 camera, kind-specific decorrelation.
    pub fn with_defaults(seed: u64, kind: TokenKind) -> Self {
        Self::new(
            seed,
            kind,
            Dims { rows: 16, cols: 16 },
            Dims {
                rows: 128,
                cols: 128,
            },
            kind.default_decorrelation_pm(),
        )
        .expect("default parameters are valid")
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn grid_dims(&self) -> Dims {
        self.grid
    }

    pub fn out_dims(&self) -> Dims {
        self.out
    }

    pub fn decorrelation_pm(&self) -> f64 {
        self.decorrelation_pm
    }

    fn dim_parts(&self) -> [u64; 6] {
        [
            self.seed,
            self.kind.code() as u64,
            self.grid.rows as u64,
            self.grid.cols as u64,
            self.out.rows as u64,
            self.out.cols as u64,
        ]
    }

    /// Output field produced by challenge pixel `i` alone. Rows are
    /// generated from their own seed on first use and then cached.
    pub fn pixel_field(&self, i: usize) -> &[Complex64] {
        self.rows[i].get_or_init(|| {
            let scale = (0.5 / self.grid.len() as f64).sqrt();
            let mut parts = self.dim_parts().to_vec();
            parts.push(i as u64);
            let mut rng = derive_rng("field", &parts);
            (0..self.out.len())
                .map(|_| gaussian_c(&mut rng, scale))
                .collect()
        })
    }

    /// Full tensor, row-major by challenge pixel: entry `(i, q)` is at
    /// `i * out.len() + q`.
    pub fn field_tensor(&self) -> Vec<Complex64> {
        (0..self.grid.len())
            .flat_map(|i| self.pixel_field(i).iter().copied())
            .collect()
    }

    /// Noise-free complex output field of a pixel pattern.
    pub fn field(&self, mask: &PixelMask) -> Result<Vec<Complex64>> {
        self.check_mask(mask)?;
        let mut e = vec![Complex64::new(0.0, 0.0); self.out.len()];
        for i in (0..self.grid.len()).filter(|&i| mask.is_on(i)) {
            for (acc, f) in e.iter_mut().zip(self.pixel_field(i)) {
                *acc += f;
            }
        }
        Ok(e)
    }

    fn check_mask(&self, mask: &PixelMask) -> Result<()> {
        if mask.dims() != self.grid {
            return Err(invalid(format!(
                "mask is {}, token grid is {}",
                mask.dims(),
                self.grid
            )));
        }
        Ok(())
    }

    pub fn respond(&self, challenge: &Challenge, noise: &NoiseParams) -> Result<SpeckleImage> {
        match challenge {
            Challenge::PixelPattern(mask) => self.respond_pattern(mask, noise),
            Challenge::Wavelength(nm) => self.wavelength_response(*nm, noise),
        }
    }

    pub fn respond_pattern(&self, mask: &PixelMask, noise: &NoiseParams) -> Result<SpeckleImage> {
        self.check_mask(mask)?;
        noise.validate()?;
        let n_on = mask.count_on();
        if n_on == 0 {
            return SpeckleImage::new(self.out, BIT_DEPTH, vec![0; self.out.len()]);
        }
        let mut rng = self.noise_rng(noise, &Challenge::PixelPattern(mask.clone()));
        let vibration = self.draw_vibration(noise, &mut rng);

        let s = noise.phase_sigma();
        let field = if s == 0.0 {
            self.field(mask)?
        } else {
            let mut e = vec![Complex64::new(0.0, 0.0); self.out.len()];
            for i in (0..self.grid.len()).filter(|&i| mask.is_on(i)) {
                for (acc, f) in e.iter_mut().zip(self.pixel_field(i)) {
                    let phi: f64 = s * rng.sample::<f64, _>(StandardNormal);
                    let (sin, cos) = phi.sin_cos();
                    *acc += f * Complex64::new(cos, sin);
                }
            }
            e
        };
        let gain = self.grid.len() as f64 / n_on as f64;
        Ok(self.capture(&field, gain, vibration, noise, &mut rng))
    }

    /// Complex field at wavelength `nm` under full-aperture illumination,
    /// unit mean power.
    ///
    /// Knots sit every quarter decorrelation length and follow a first-order
    /// autoregression, so fields at knots `k` apart correlate as `a^k` with
    /// `a = exp(-1/4)`. Between knots the field is the unit-power blend whose
    /// correlation with the lower knot is `exp(-delta/L)`.
    pub fn wavelength_field(&self, nm: f64) -> Result<Vec<Complex64>> {
        check_wavelength(nm)?;
        let spacing_nm = self.decorrelation_pm / 4000.0;
        let pos = (nm - WAVELENGTH_MIN_NM) / spacing_nm;
        let k = pos.floor() as u64;
        let delta_pm = (pos - k as f64) * spacing_nm * 1000.0;

        let a = (-0.25f64).exp();
        let mut coefs: Vec<(u64, f64)> = Vec::new();
        let mut x0_coef = 0.0;
        let rho1 = (-delta_pm / self.decorrelation_pm).exp();
        let (w1, w2) = if delta_pm <= 0.0 {
            (1.0, 0.0)
        } else {
            let w2 = ((1.0 - rho1 * rho1) / (1.0 - a * a)).sqrt();
            (rho1 - a * w2, w2)
        };
        for (knot, w) in [(k, w1), (k + 1, w2)] {
            if w == 0.0 {
                continue;
            }
            x0_coef += knot_terms(knot, a, w, &mut coefs);
        }

        let mut e: Vec<Complex64> = if x0_coef != 0.0 {
            self.full_field().iter().map(|z| z * x0_coef).collect()
        } else {
            vec![Complex64::new(0.0, 0.0); self.out.len()]
        };
        coefs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(u64, f64)> = Vec::new();
        for (j, c) in coefs {
            match merged.last_mut() {
                Some((lj, lc)) if *lj == j => *lc += c,
                _ => merged.push((j, c)),
            }
        }
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        for (j, c) in merged {
            let mut parts = self.dim_parts().to_vec();
            parts.push(j);
            let mut rng = derive_rng("wl-knot", &parts);
            for acc in e.iter_mut() {
                *acc += gaussian_c(&mut rng, scale) * c;
            }
        }
        Ok(e)
    }

    pub fn wavelength_response(&self, nm: f64, noise: &NoiseParams) -> Result<SpeckleImage> {
        noise.validate()?;
        let mut field = self.wavelength_field(nm)?;
        let mut rng = self.noise_rng(noise, &Challenge::Wavelength(nm));
        let vibration = self.draw_vibration(noise, &mut rng);
        let s = noise.phase_sigma();
        if s > 0.0 {
            // Many independent pixel phases add up to a partially coherent
            // copy of the field plus a fresh circular Gaussian remainder.
            let keep = (-s * s / 2.0).exp();
            let fresh = (1.0 - (-s * s).exp()).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
            for z in field.iter_mut() {
                *z = *z * keep + gaussian_c(&mut rng, fresh);
            }
        }
        Ok(self.capture(&field, 1.0, vibration, noise, &mut rng))
    }

    fn full_field(&self) -> &[Complex64] {
        self.full_field.get_or_init(|| {
            self.field(&PixelMask::full(self.grid))
                .expect("full mask matches grid")
        })
    }

    fn noise_rng(&self, noise: &NoiseParams, challenge: &Challenge) -> ChaCha8Rng {
        let digest = Sha256::digest(challenge.to_bytes());
        let tag = u64::from_le_bytes(digest[..8].try_into().unwrap());
        derive_rng(
            "capture-noise",
            &[noise.noise_seed, self.seed, self.kind.code() as u64, tag],
        )
    }

    /// Returns the illumination envelope of a disturbed capture, if any.
    fn draw_vibration(&self, noise: &NoiseParams, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        if noise.vibration_prob == 0.0 {
            return None;
        }
        let hit = rng.random::<f64>() < noise.vibration_prob;
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        if !hit || noise.vibration_amplitude == 0.0 {
            return None;
        }
        let (rows, cols) = (self.out.rows, self.out.cols);
        let coord = |i: usize, n: usize| {
            if n == 1 {
                0.0
            } else {
                2.0 * i as f64 / (n - 1) as f64 - 1.0
            }
        };
        let (sin, cos) = theta.sin_cos();
        let mut g: Vec<f64> = (0..rows * cols)
            .map(|p| {
                let (r, c) = (p / cols, p % cols);
                (noise.vibration_amplitude * (cos * coord(c, cols) + sin * coord(r, rows))).exp()
            })
            .collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        g.iter_mut().for_each(|v| *v /= mean);
        Some(g)
    }

    fn capture(
        &self,
        field: &[Complex64],
        gain: f64,
        vibration: Option<Vec<f64>>,
        noise: &NoiseParams,
        rng: &mut ChaCha8Rng,
    ) -> SpeckleImage {
        let full_scale = image::max_value(BIT_DEPTH) as f64;
        let level = gain * MEAN_LEVEL * full_scale;
        let sigma = noise.intensity_sigma * full_scale;
        let pixels = field
            .iter()
            .enumerate()
            .map(|(q, z)| {
                let mut v = z.norm_sqr() * level;
                if let Some(g) = &vibration {
                    v *= g[q];
                }
                if sigma > 0.0 {
                    v += sigma * rng.sample::<f64, _>(StandardNormal);
                }
                quantize(v, full_scale)
            })
            .collect();
        SpeckleImage::new(self.out, BIT_DEPTH, pixels).expect("quantized pixels are in range")
    }

    /// Binary descriptor: `PUFT`, version, kind, seed, dims, decorrelation.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(39);
        out.extend_from_slice(DESCRIPTOR_MAGIC.as_bytes());
        out.extend_from_slice(&DESCRIPTOR_VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for d in [self.grid.rows, self.grid.cols, self.out.rows, self.out.cols] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.decorrelation_pm.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(DESCRIPTOR_MAGIC)?;
        let version = r.u16_le()?;
        if version != DESCRIPTOR_VERSION {
            return Err(FormatError::UnsupportedVersion(version).into());
        }
        let kind_code = r.u8()?;
        let kind = TokenKind::from_code(kind_code)
            .ok_or_else(|| FormatError::Malformed(format!("unknown token kind {kind_code}")))?;
        let seed = r.u64_le()?;
        let mut d = [0usize; 4];
        for v in d.iter_mut() {
            *v = r.u32_le()? as usize;
        }
        let decorrelation = r.f64_le()?;
        r.finish()?;
        Self::new(
            seed,
            kind,
            Dims::new(d[0], d[1])?,
            Dims::new(d[2], d[3])?,
            decorrelation,
        )
    }

    /// First 16 bytes of SHA-256 over the descriptor.
    pub fn token_id(&self) -> [u8; 16] {
        let d = Sha256::digest(self.to_bytes());
        d[..16].try_into().unwrap()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Appends the innovation weights of knot `k`, scaled by `w`, to `coefs` and
/// returns the weight of the base field.
fn knot_terms(k: u64, a: f64, w: f64, coefs: &mut Vec<(u64, f64)>) -> f64 {
    let innov = w * (1.0 - a * a).sqrt();
    if k < KNOT_WINDOW {
        for j in 1..=k {
            coefs.push((j, innov * a.powi((k - j) as i32)));
        }
        w * a.powi(k as i32)
    } else {
        let norm = (1.0 - a.powi(2 * KNOT_WINDOW as i32)).sqrt();
        for j in (k + 1 - KNOT_WINDOW)..=k {
            coefs.push((j, innov * a.powi((k - j) as i32) / norm));
        }
        0.0
    }
}

fn gaussian_c<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Round half up, then clamp to `[0, full_scale]`.
pub(crate) fn quantize(v: f64, full_scale: f64) -> u16 {
    (v + 0.5).floor().clamp(0.0, full_scale) as u16
}
