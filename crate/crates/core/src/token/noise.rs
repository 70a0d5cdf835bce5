use crate::error::{invalid, Result};

/// Default thermal phase-drift coefficient in rad/°C.
pub const DEFAULT_DRIFT_COEFF: f64 = 0.15;

/// Capture conditions for one response.
///
/// All-zero sigmas, zero `delta_t` and zero `vibration_prob` give a pure
/// function of token and challenge, bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Additive Gaussian intensity noise, as a fraction of full scale.
    pub intensity_sigma: f64,
    /// Per-component phase jitter in radians.
    pub phase_drift_sigma: f64,
    /// Temperature offset from enrollment conditions in °C.
    pub delta_t: f64,
    /// Phase drift per °C of `|delta_t|`.
    pub drift_coeff: f64,
    /// Chance that a capture is hit by a mechanical disturbance.
    pub vibration_prob: f64,
    /// Log-amplitude of the illumination tilt a disturbance introduces.
    pub vibration_amplitude: f64,
    pub noise_seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        Self {
            intensity_sigma: 0.0,
            phase_drift_sigma: 0.0,
            delta_t: 0.0,
            drift_coeff: DEFAULT_DRIFT_COEFF,
            vibration_prob: 0.0,
            vibration_amplitude: 0.0,
            noise_seed: 0,
        }
    }

    /// Everyday bench conditions with thermal stabilization on.
    pub fn typical() -> Self {
        Self {
            intensity_sigma: 0.005,
            phase_drift_sigma: 0.05,
            ..Self::none()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise_seed = seed;
        self
    }

    pub fn with_delta_t(mut self, delta_t: f64) -> Self {
        self.delta_t = delta_t;
        self
    }

    pub fn with_vibration(mut self, prob: f64, amplitude: f64) -> Self {
        self.vibration_prob = prob;
        self.vibration_amplitude = amplitude;
        self
    }

    /// Total phase standard deviation including thermal drift.
    pub fn phase_sigma(&self) -> f64 {
        self.phase_drift_sigma + self.drift_coeff * self.delta_t.abs()
    }

    pub fn is_silent(&self) -> bool {
        self.intensity_sigma == 0.0 && self.phase_sigma() == 0.0 && self.vibration_prob == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("intensity_sigma", self.intensity_sigma),
            ("phase_drift_sigma", self.phase_drift_sigma),
            ("drift_coeff", self.drift_coeff),
            ("vibration_amplitude", self.vibration_amplitude),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.delta_t.is_finite() {
            return Err(invalid("delta_t must be finite"));
        }
        if !(0.0..=1.0).contains(&self.vibration_prob) {
            return Err(invalid("vibration_prob must lie in [0, 1]"));
        }
        Ok(())
    }
}
