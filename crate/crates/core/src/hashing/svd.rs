//! Two-stage block SVD hash.
//!
//! Stage one takes the dominant singular vectors of `p` random `k1 x k1`
//! image blocks and stacks them into a `k1 x 2p` intermediate matrix. Stage
//! two repeats this on `r` random `k2 x k2` blocks of that matrix. The
//! resulting vector is quantized by comparing each element with its right
//! neighbour, wrapping at the end.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use crate::bits::BitKey;
use crate::error::{invalid, Error, Result};
use crate::seed::derive_rng;
use crate::token::{Dims, SpeckleImage};

const SVD_EPS: f64 = 1e-12;
const SVD_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdParams {
    pub m: usize,
    pub k1: usize,
    pub k2: usize,
    pub p: usize,
    pub r: usize,
}

impl Default for SvdParams {
    fn default() -> Self {
        Self {
            m: 255,
            k1: 32,
            k2: 16,
            p: 64,
            r: 32,
        }
    }
}

impl SvdParams {
    /// Length of the vector before quantization.
    pub fn raw_len(&self) -> usize {
        2 * self.r * self.k2
    }

    fn validate(&self, dims: Dims) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 || self.p == 0 || self.r == 0 {
            return Err(invalid("block sizes and counts must be positive"));
        }
        if self.k1 > dims.rows.min(dims.cols) {
            return Err(invalid(format!(
                "k1 = {} does not fit a {} image",
                self.k1, dims
            )));
        }
        if self.k2 > self.k1 || self.k2 > 2 * self.p {
            return Err(invalid(format!(
                "k2 = {} does not fit the {}x{} intermediate matrix",
                self.k2,
                self.k1,
                2 * self.p
            )));
        }
        if self.m == 0 || self.m > self.raw_len() {
            return Err(invalid(format!(
                "M = {} must lie in 1..={}",
                self.m,
                self.raw_len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvdHelper {
    dims: Dims,
    k1: usize,
    k2: usize,
    stage1: Vec<(u32, u32)>,
    stage2: Vec<(u32, u32)>,
    indices: Vec<u32>,
}

impl SvdHelper {
    pub fn new(
        dims: Dims,
        k1: usize,
        k2: usize,
        stage1: Vec<(u32, u32)>,
        stage2: Vec<(u32, u32)>,
        indices: Vec<u32>,
    ) -> Result<Self> {
        let params = SvdParams {
            m: indices.len(),
            k1,
            k2,
            p: stage1.len(),
            r: stage2.len(),
        };
        params.validate(dims)?;
        let fits = |(r, c): (u32, u32), rows: usize, cols: usize, k: usize| {
            r as usize + k <= rows && c as usize + k <= cols
        };
        if !stage1.iter().all(|&o| fits(o, dims.rows, dims.cols, k1)) {
            return Err(invalid("stage-one block outside the image"));
        }
        if !stage2.iter().all(|&o| fits(o, k1, 2 * stage1.len(), k2)) {
            return Err(invalid("stage-two block outside the intermediate matrix"));
        }
        if indices.iter().any(|&i| i as usize >= params.raw_len()) {
            return Err(invalid("selected index outside the hash vector"));
        }
        Ok(Self {
            dims,
            k1,
            k2,
            stage1,
            stage2,
            indices,
        })
    }

    pub fn random(dims: Dims, params: SvdParams, seed: u64) -> Result<Self> {
        params.validate(dims)?;
        let mut rng = derive_rng("svd", &[seed]);
        let stage1 = origins(&mut rng, params.p, dims.rows, dims.cols, params.k1);
        let stage2 = origins(&mut rng, params.r, params.k1, 2 * params.p, params.k2);
        let indices = index::sample(&mut rng, params.raw_len(), params.m)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        Self::new(dims, params.k1, params.k2, stage1, stage2, indices)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn params(&self) -> SvdParams {
        SvdParams {
            m: self.indices.len(),
            k1: self.k1,
            k2: self.k2,
            p: self.stage1.len(),
            r: self.stage2.len(),
        }
    }

    pub fn stage1_origins(&self) -> &[(u32, u32)] {
        &self.stage1
    }

    pub fn stage2_origins(&self) -> &[(u32, u32)] {
        &self.stage2
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

fn origins<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    rows: usize,
    cols: usize,
    k: usize,
) -> Vec<(u32, u32)> {
    (0..n)
        .map(|_| {
            (
                rng.random_range(0..=rows - k) as u32,
                rng.random_range(0..=cols - k) as u32,
            )
        })
        .collect()
}

/// Dominant left and right singular vectors, each flipped so that its
/// largest-magnitude entry is positive.
pub fn first_singular_vectors(block: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let svd = block
        .clone()
        .try_svd(true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let best = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Numeric("empty SVD".into()))?;
    let u = svd
        .u
        .as_ref()
        .expect("requested U")
        .column(best)
        .into_owned();
    let v = svd
        .v_t
        .as_ref()
        .expect("requested V^T")
        .row(best)
        .transpose();
    Ok((sign_normalized(u), sign_normalized(v)))
}

fn sign_normalized(mut v: DVector<f64>) -> DVector<f64> {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if pivot < 0.0 {
        v.neg_mut();
    }
    v
}

/// Cyclic right-neighbour quantization: bit `i` is 0 when `h[i] < h[i+1]`.
pub fn quantize_cyclic(h: &[f64]) -> Vec<u8> {
    let n = h.len();
    (0..n).map(|i| u8::from(h[i] >= h[(i + 1) % n])).collect()
}

/// Pixel values scaled to unit mean.
fn unit_mean(image: &SpeckleImage) -> Result<DMatrix<f64>> {
    let d = image.dims();
    let px = image.to_f64();
    let mean = px.iter().sum::<f64>() / px.len() as f64;
    if mean <= 0.0 {
        return Err(Error::DegenerateInput("image is entirely dark".into()));
    }
    Ok(DMatrix::from_row_iterator(
        d.rows,
        d.cols,
        px.into_iter().map(|v| v / mean),
    ))
}

/// Unquantized hash vector `h` of length `2 r k2`.
pub fn svd_raw(image: &SpeckleImage, helper: &SvdHelper) -> Result<Vec<f64>> {
    if image.dims() != helper.dims {
        return Err(invalid(format!(
            "image is {}, helper expects {}",
            image.dims(),
            helper.dims
        )));
    }
    let img = unit_mean(image)?;
    let (k1, k2, p) = (helper.k1, helper.k2, helper.stage1.len());
    let mut gamma = DMatrix::<f64>::zeros(k1, 2 * p);
    for (j, &(r, c)) in helper.stage1.iter().enumerate() {
        let block = img.view((r as usize, c as usize), (k1, k1)).into_owned();
        let (u, v) = first_singular_vectors(&block)?;
        gamma.set_column(j, &u);
        gamma.set_column(p + j, &v);
    }
    let mut h = Vec::with_capacity(2 * helper.stage2.len() * k2);
    for &(r, c) in &helper.stage2 {
        let block = gamma.view((r as usize, c as usize), (k2, k2)).into_owned();
        let (u, v) = first_singular_vectors(&block)?;
        h.extend(u.iter());
        h.extend(v.iter());
    }
    Ok(h)
}

pub fn svd_hash(image: &SpeckleImage, helper: &SvdHelper) -> Result<BitKey> {
    let bits = quantize_cyclic(&svd_raw(image, helper)?);
    BitKey::new(helper.indices.iter().map(|&i| bits[i as usize]).collect())
}

pub fn svd_enroll(
    image: &SpeckleImage,
    params: SvdParams,
    seed: u64,
) -> Result<(BitKey, SvdHelper)> {
    let helper = SvdHelper::random(image.dims(), params, seed)?;
    let key = svd_hash(image, &helper)?;
    Ok((key, helper))
}
