//! Speckle image to bit string.

mod rbm;
mod svd;

use std::path::Path;

use crate::bits::{pack_bits, unpack_bits, BitKey};
use crate::codec::Reader;
use crate::error::{Error, FormatError, Result};
use crate::token::{Dims, SpeckleImage};

pub use rbm::{mean_threshold, rbm_enroll, rbm_hash, rbm_project, RbmHelper};
pub use svd::{
    first_singular_vectors, quantize_cyclic, svd_enroll, svd_hash, svd_raw, SvdHelper, SvdParams,
};

/// Default hash length.
pub const DEFAULT_M: usize = 255;

const HELPER_MAGIC: &str = "PUFH";
const HELPER_VERSION: u16 = 1;

/// Row-major pixels shifted to mean 0 and scaled to population std 1.
pub fn standardize(image: &SpeckleImage) -> Result<Vec<f64>> {
    let px = image.to_f64();
    let n = px.len() as f64;
    let mean = px.iter().sum::<f64>() / n;
    let var = px.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::DegenerateInput("image is constant".into()));
    }
    let sd = var.sqrt();
    Ok(px.into_iter().map(|v| (v - mean) / sd).collect())
}

/// Which hash to run at enrollment, and the seed for its public parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashConfig {
    Rbm { m: usize, seed: u64 },
    Svd { params: SvdParams, seed: u64 },
}

impl HashConfig {
    pub fn rbm(m: usize, seed: u64) -> Self {
        HashConfig::Rbm { m, seed }
    }

    pub fn svd(params: SvdParams, seed: u64) -> Self {
        HashConfig::Svd { params, seed }
    }

    pub fn m(&self) -> usize {
        match self {
            HashConfig::Rbm { m, .. } => *m,
            HashConfig::Svd { params, .. } => params.m,
        }
    }

    pub fn enroll(&self, image: &SpeckleImage) -> Result<(BitKey, HashHelper)> {
        match *self {
            HashConfig::Rbm { m, seed } => {
                let (k, h) = rbm_enroll(image, m, seed)?;
                Ok((k, HashHelper::Rbm(h)))
            }
            HashConfig::Svd { params, seed } => {
                let (k, h) = svd_enroll(image, params, seed)?;
                Ok((k, HashHelper::Svd(h)))
            }
        }
    }

    /// Builds the helper without hashing anything.
    pub fn helper(&self, dims: Dims) -> Result<HashHelper> {
        match *self {
            HashConfig::Rbm { m, seed } => Ok(HashHelper::Rbm(RbmHelper::random(dims, m, seed)?)),
            HashConfig::Svd { params, seed } => {
                Ok(HashHelper::Svd(SvdHelper::random(dims, params, seed)?))
            }
        }
    }
}

/// Public hash parameters stored with an enrollment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HashHelper {
    Rbm(RbmHelper),
    Svd(SvdHelper),
}

impl HashHelper {
    pub fn hash(&self, image: &SpeckleImage) -> Result<BitKey> {
        match self {
            HashHelper::Rbm(h) => rbm_hash(image, h),
            HashHelper::Svd(h) => svd_hash(image, h),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            HashHelper::Rbm(h) => h.m(),
            HashHelper::Svd(h) => h.m(),
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            HashHelper::Rbm(h) => h.dims(),
            HashHelper::Svd(h) => h.dims(),
        }
    }

    pub fn algorithm(&self) -> &'static str {
        match self {
            HashHelper::Rbm(_) => "rbm",
            HashHelper::Svd(_) => "svd",
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(HELPER_MAGIC.as_bytes());
        out.extend_from_slice(&HELPER_VERSION.to_le_bytes());
        let (algo, indices) = match self {
            HashHelper::Rbm(h) => (0u8, h.indices()),
            HashHelper::Svd(h) => (1u8, h.indices()),
        };
        out.push(algo);
        put_u32(&mut out, indices.len());
        let dims = self.dims();
        put_u32(&mut out, dims.rows);
        put_u32(&mut out, dims.cols);
        match self {
            HashHelper::Rbm(h) => {
                let bits: Vec<u8> = h.signs().iter().map(|&s| u8::from(s > 0)).collect();
                out.extend_from_slice(&pack_bits(&bits));
            }
            HashHelper::Svd(h) => {
                let p = h.params();
                for v in [p.k1, p.k2, p.p, p.r] {
                    put_u32(&mut out, v);
                }
                for &(r, c) in h.stage1_origins().iter().chain(h.stage2_origins()) {
                    put_u32(&mut out, r as usize);
                    put_u32(&mut out, c as usize);
                }
            }
        }
        for &i in indices {
            put_u32(&mut out, i as usize);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(HELPER_MAGIC)?;
        let version = r.u16_le()?;
        if version != HELPER_VERSION {
            return Err(FormatError::UnsupportedVersion(version).into());
        }
        let algo = r.u8()?;
        let m = r.u32_le()? as usize;
        let rows = r.u32_le()? as usize;
        let cols = r.u32_le()? as usize;
        let dims = Dims::new(rows, cols).map_err(|e| FormatError::Malformed(e.to_string()))?;
        let helper = match algo {
            0 => {
                let packed = r.take(dims.len().div_ceil(8))?;
                let signs = unpack_bits(packed, dims.len())
                    .into_iter()
                    .map(|b| if b == 1 { 1 } else { -1 })
                    .collect();
                let indices = read_u32s(&mut r, m)?;
                HashHelper::Rbm(RbmHelper::new(dims, signs, indices)?)
            }
            1 => {
                let k1 = r.u32_le()? as usize;
                let k2 = r.u32_le()? as usize;
                let p = r.u32_le()? as usize;
                let nr = r.u32_le()? as usize;
                let pairs = read_u32s(&mut r, 2 * (p + nr))?;
                let mut origins = pairs.chunks_exact(2).map(|c| (c[0], c[1]));
                let stage1 = origins.by_ref().take(p).collect();
                let stage2 = origins.collect();
                let indices = read_u32s(&mut r, m)?;
                HashHelper::Svd(SvdHelper::new(dims, k1, k2, stage1, stage2, indices)?)
            }
            other => {
                return Err(
                    FormatError::Malformed(format!("unknown hash algorithm {other}")).into(),
                )
            }
        };
        r.finish()?;
        Ok(helper)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn read_u32s(r: &mut Reader<'_>, n: usize) -> std::result::Result<Vec<u32>, FormatError> {
    // Check the length up front so a corrupt count cannot trigger a huge allocation.
    let bytes = r.take(
        n.checked_mul(4)
            .ok_or(FormatError::Truncated { needed: usize::MAX })?,
    )?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
