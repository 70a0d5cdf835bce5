//! Distances, correlation, histograms and evaluation campaigns.

mod campaign;
mod histogram;
mod success;

use crate::bits::BitKey;
use crate::error::{invalid, Error, Result};
use crate::token::SpeckleImage;

pub use campaign::{run_campaign, Campaign, CampaignKind, CampaignReports, MAX_PAIRS};
pub use histogram::{joint_edges, joint_overlap, overlap, Binning, DistanceReport, Histogram};
pub use success::{protocol_success_curve, success_curve, SuccessCurve};

/// Euclidean distance between two images.
pub fn euclidean(a: &SpeckleImage, b: &SpeckleImage) -> Result<f64> {
    check_dims(a, b)?;
    Ok(euclidean_slice(&a.to_f64(), &b.to_f64()))
}

pub fn euclidean_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Number of differing bits.
pub fn hamming(a: &BitKey, b: &BitKey) -> Result<usize> {
    a.hamming(b)
}

/// Hamming distance divided by key length.
pub fn fractional_hamming(a: &BitKey, b: &BitKey) -> Result<f64> {
    Ok(a.hamming(b)? as f64 / a.len() as f64)
}

/// Pearson correlation over pixels.
pub fn cross_correlation(a: &SpeckleImage, b: &SpeckleImage) -> Result<f64> {
    check_dims(a, b)?;
    pearson(&a.to_f64(), &b.to_f64())
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid("correlation needs two equal, non-empty samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateInput(
            "correlation of a constant image".into(),
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn check_dims(a: &SpeckleImage, b: &SpeckleImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(invalid(format!(
            "image sizes differ: {} vs {}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}
