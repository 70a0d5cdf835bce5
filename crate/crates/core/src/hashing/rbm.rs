//! Random binary method: threshold the real part of a randomly signed,
//! subsampled Fourier transform of the standardized image.

use std::cell::RefCell;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rustfft::FftPlanner;

use crate::bits::BitKey;
use crate::error::{invalid, Result};
use crate::seed::derive_rng;
use crate::token::{Dims, SpeckleImage};

use super::standardize;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Public parameters of one RBM hash: the diagonal signs `U` and the
/// selected frequency indices `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbmHelper {
    dims: Dims,
    signs: Vec<i8>,
    indices: Vec<u32>,
}

impl RbmHelper {
    pub fn new(dims: Dims, signs: Vec<i8>, indices: Vec<u32>) -> Result<Self> {
        let n = dims.len();
        if signs.len() != n {
            return Err(invalid(format!("{} signs for {} pixels", signs.len(), n)));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("signs must be +1 or -1"));
        }
        if indices.is_empty() {
            return Err(invalid("at least one index must be selected"));
        }
        if let Some(&i) = indices.iter().find(|&&i| i as usize >= n) {
            return Err(invalid(format!("index {i} outside [0, {n})")));
        }
        Ok(Self {
            dims,
            signs,
            indices,
        })
    }

    /// Random signs and `m` distinct indices drawn uniformly from `[0, N)`.
    pub fn random(dims: Dims, m: usize, seed: u64) -> Result<Self> {
        let n = dims.len();
        if m == 0 || m > n {
            return Err(invalid(format!("M = {m} must lie in 1..={n}")));
        }
        let mut rng = derive_rng("rbm", &[seed]);
        let signs = random_signs(&mut rng, n);
        let indices = index::sample(&mut rng, n, m)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        Self::new(dims, signs, indices)
    }

    /// Like [`RbmHelper::random`], but draws indices from `[1, (N-1)/2]` only.
    ///
    /// The transform of a real vector is conjugate symmetric, so index `k`
    /// and `N-k` carry the same real part. Keeping to one half avoids
    /// repeated bits when the output must look random.
    pub fn half_spectrum(dims: Dims, m: usize, seed: u64) -> Result<Self> {
        let n = dims.len();
        let half = (n - 1) / 2;
        if m == 0 || m > half {
            return Err(invalid(format!("M = {m} must lie in 1..={half}")));
        }
        let mut rng = derive_rng("rbm-half", &[seed]);
        let signs = random_signs(&mut rng, n);
        let indices = index::sample(&mut rng, half, m)
            .into_iter()
            .map(|i| i as u32 + 1)
            .collect();
        Self::new(dims, signs, indices)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

fn random_signs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<i8> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect()
}

/// Real parts of `S F U y` for an already standardized vector `y`.
pub fn rbm_project(y: &[f64], helper: &RbmHelper) -> Result<Vec<f64>> {
    if y.len() != helper.dims.len() {
        return Err(invalid("vector length does not match helper"));
    }
    let mut buf: Vec<Complex64> = y
        .iter()
        .zip(&helper.signs)
        .map(|(&v, &s)| Complex64::new(v * s as f64, 0.0))
        .collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(&mut buf);
    Ok(helper.indices.iter().map(|&i| buf[i as usize].re).collect())
}

/// One bit per value: 1 when the value is at or above the mean.
pub fn mean_threshold(values: &[f64]) -> Result<BitKey> {
    if values.is_empty() {
        return Err(invalid("nothing to threshold"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    BitKey::from_bools(values.iter().map(|&v| v >= mean))
}

pub fn rbm_enroll(image: &SpeckleImage, m: usize, seed: u64) -> Result<(BitKey, RbmHelper)> {
    let helper = RbmHelper::random(image.dims(), m, seed)?;
    let key = rbm_hash(image, &helper)?;
    Ok((key, helper))
}

pub fn rbm_hash(image: &SpeckleImage, helper: &RbmHelper) -> Result<BitKey> {
    if image.dims() != helper.dims {
        return Err(invalid(format!(
            "image is {}, helper expects {}",
            image.dims(),
            helper.dims
        )));
    }
    let y = standardize(image)?;
    mean_threshold(&rbm_project(&y, helper)?)
}
