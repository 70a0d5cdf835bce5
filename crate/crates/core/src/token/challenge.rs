use rand::Rng;

use crate::codec::Reader;
use crate::error::{invalid, FormatError, Result};

use super::Dims;

/// Lower edge of the laser tuning range in nanometres.
pub const WAVELENGTH_MIN_NM: f64 = 1540.0;
/// Upper edge of the laser tuning range in nanometres.
pub const WAVELENGTH_MAX_NM: f64 = 1570.0;

/// On/off state of every pixel of the spatial light modulator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    dims: Dims,
    on: Vec<bool>,
}

impl PixelMask {
    pub fn new(dims: Dims, on: Vec<bool>) -> Result<Self> {
        if on.len() != dims.len() {
            return Err(invalid(format!(
                "mask has {} entries, grid {}x{} needs {}",
                on.len(),
                dims.rows,
                dims.cols,
                dims.len()
            )));
        }
        Ok(Self { dims, on })
    }

    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            on: vec![false; dims.len()],
        }
    }

    pub fn full(dims: Dims) -> Self {
        Self {
            dims,
            on: vec![true; dims.len()],
        }
    }

    /// Only the listed pixel indices (row-major) switched on.
    pub fn with_pixels(dims: Dims, pixels: &[usize]) -> Result<Self> {
        let mut on = vec![false; dims.len()];
        for &p in pixels {
            if p >= on.len() {
                return Err(invalid(format!("pixel {p} outside grid")));
            }
            on[p] = true;
        }
        Ok(Self { dims, on })
    }

    /// Each pixel independently on with probability `density`.
    pub fn random<R: Rng + ?Sized>(dims: Dims, density: f64, rng: &mut R) -> Self {
        let on = (0..dims.len())
            .map(|_| rng.random::<f64>() < density)
            .collect();
        Self { dims, on }
    }

    /// Groups the grid into `blocks.rows x blocks.cols` macro pixels and
    /// switches on those selected by `subset` (bit `b` = macro pixel `b`,
    /// row-major). Mimics a coarse LCD driving a finer grid.
    pub fn from_macro_pixels(dims: Dims, blocks: Dims, subset: u64) -> Result<Self> {
        if blocks.len() > 64
            || !dims.rows.is_multiple_of(blocks.rows)
            || !dims.cols.is_multiple_of(blocks.cols)
        {
            return Err(invalid("macro-pixel layout must evenly tile the grid"));
        }
        let bh = dims.rows / blocks.rows;
        let bw = dims.cols / blocks.cols;
        let on = (0..dims.len())
            .map(|i| {
                let (r, c) = (i / dims.cols, i % dims.cols);
                let b = (r / bh) * blocks.cols + c / bw;
                subset >> b & 1 == 1
            })
            .collect();
        Ok(Self { dims, on })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn is_on(&self, i: usize) -> bool {
        self.on[i]
    }

    pub fn pixels(&self) -> &[bool] {
        &self.on
    }

    pub fn count_on(&self) -> usize {
        self.on.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &PixelMask) -> Result<PixelMask> {
        self.check_dims(other)?;
        Ok(PixelMask {
            dims: self.dims,
            on: self
                .on
                .iter()
                .zip(&other.on)
                .map(|(a, b)| *a || *b)
                .collect(),
        })
    }

    pub fn is_disjoint(&self, other: &PixelMask) -> bool {
        self.dims == other.dims && !self.on.iter().zip(&other.on).any(|(a, b)| *a && *b)
    }

    /// Number of pixels switched on in both masks.
    pub fn overlap(&self, other: &PixelMask) -> Result<usize> {
        self.check_dims(other)?;
        Ok(self
            .on
            .iter()
            .zip(&other.on)
            .filter(|(a, b)| **a && **b)
            .count())
    }

    fn check_dims(&self, other: &PixelMask) -> Result<()> {
        if self.dims != other.dims {
            return Err(invalid("mask dimensions differ"));
        }
        Ok(())
    }
}

/// A stimulus applied to the token.
#[derive(Debug, Clone, PartialEq)]
pub enum Challenge {
    PixelPattern(PixelMask),
    /// Laser wavelength in nanometres.
    Wavelength(f64),
}

impl Challenge {
    pub fn wavelength(nm: f64) -> Result<Self> {
        check_wavelength(nm)?;
        Ok(Challenge::Wavelength(nm))
    }

    /// Compact binary encoding used inside records and wire frames.
    ///
    /// `0x00 rows:u32 cols:u32 packed-bits` or `0x01 nm:f64`, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Challenge::PixelPattern(mask) => {
                out.push(0);
                out.extend_from_slice(&(mask.dims.rows as u32).to_le_bytes());
                out.extend_from_slice(&(mask.dims.cols as u32).to_le_bytes());
                let bits: Vec<u8> = mask.on.iter().map(|&b| u8::from(b)).collect();
                out.extend_from_slice(&crate::bits::pack_bits(&bits));
            }
            Challenge::Wavelength(nm) => {
                out.push(1);
                out.extend_from_slice(&nm.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        let c = match r.u8()? {
            0 => {
                let rows = r.u32_le()? as usize;
                let cols = r.u32_le()? as usize;
                let dims =
                    Dims::new(rows, cols).map_err(|e| FormatError::Malformed(e.to_string()))?;
                let packed = r.take(dims.len().div_ceil(8))?;
                let on = crate::bits::unpack_bits(packed, dims.len())
                    .into_iter()
                    .map(|b| b == 1)
                    .collect();
                Challenge::PixelPattern(PixelMask { dims, on })
            }
            1 => {
                let nm = r.f64_le()?;
                if !nm.is_finite() {
                    return Err(FormatError::Malformed("non-finite wavelength".into()));
                }
                Challenge::Wavelength(nm)
            }
            tag => {
                return Err(FormatError::Malformed(format!(
                    "unknown challenge tag {tag}"
                )))
            }
        };
        r.finish()?;
        Ok(c)
    }
}

pub(crate) fn check_wavelength(nm: f64) -> Result<()> {
    if !(WAVELENGTH_MIN_NM..=WAVELENGTH_MAX_NM).contains(&nm) {
        return Err(invalid(format!(
            "wavelength {nm} nm outside tuning range {WAVELENGTH_MIN_NM}-{WAVELENGTH_MAX_NM} nm"
        )));
    }
    Ok(())
}
