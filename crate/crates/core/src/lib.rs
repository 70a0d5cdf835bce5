//! Simulated optical physical unclonable function.
//!
//! A seeded speckle token model stands in for the optics. Around it sit the
//! image hashes, a BCH fuzzy commitment, evaluation campaigns, a randomness
//! test battery and a small framed TCP service.

pub mod bch;
pub mod bits;
mod codec;
pub mod error;
pub mod hashing;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod seed;
pub mod service;
pub mod token;

pub use bch::{Bch, DecodeOutcome};
pub use bits::BitKey;
pub use error::{Error, FormatError, Result};
pub use hashing::{HashConfig, HashHelper, RbmHelper, SvdHelper, SvdParams};
pub use protocol::{AuthOutcome, EnrollContext, EnrollmentRecord};
pub use rng::{BitStream, TestId, TestResult};
pub use token::{Challenge, Dims, NoiseParams, PixelMask, SpeckleImage, TokenKind, TokenModel};
