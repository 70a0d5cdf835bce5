//! Fuzzy commitment on top of the image hash.
//!
//! Enrollment hashes the response to `K_E`, draws a random secret, and
//! publishes `h_K = K_E xor encode(secret)` with the hash helper. A later
//! response hashing to `K_A'` decodes `K_A' xor h_K` and rebuilds the key as
//! `h_K xor encode(secret)`.

use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::bch::{Bch, DecodeOutcome};
use crate::bits::{pack_bits, BitKey};
use crate::codec::{put_bitstring, put_blob, Reader};
use crate::error::{invalid, FormatError, Result};
use crate::hashing::{HashConfig, HashHelper};
use crate::seed::derive_rng;
use crate::token::{Challenge, SpeckleImage};

const RECORD_MAGIC: &str = "PUFR";
const RECORD_VERSION: u16 = 1;

/// Digest algorithm identifiers stored in records.
pub const DIGEST_SHA256: u8 = 1;

/// SHA-256 over the bit length (u32 LE) and the packed key bits.
pub fn key_digest(key: &BitKey) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((key.len() as u32).to_le_bytes());
    h.update(pack_bits(key.bits()));
    h.finalize().into()
}

/// Binds `key` to a fresh codeword. Returns the code offset.
pub fn commit(key: &BitKey, code: &Bch, seed: u64) -> Result<BitKey> {
    if key.len() != code.n() {
        return Err(invalid(format!(
            "key has {} bits, code length is {}",
            key.len(),
            code.n()
        )));
    }
    let mut rng = derive_rng("secret", &[seed]);
    let secret: Vec<u8> = (0..code.ell())
        .map(|_| u8::from(rng.random::<bool>()))
        .collect();
    let codeword = BitKey::new(code.encode(&secret)?)?;
    key.xor(&codeword)
}

/// Rebuilds the committed key from a close key and the offset.
///
/// Returns `None` when the decoder cannot correct the difference.
pub fn reproduce(noisy: &BitKey, offset: &BitKey, code: &Bch) -> Result<Option<(BitKey, usize)>> {
    if noisy.len() != offset.len() || offset.len() != code.n() {
        return Err(invalid("key, offset and code lengths differ"));
    }
    let received = noisy.xor(offset)?;
    match code.decode(received.bits())? {
        DecodeOutcome::Corrected { message, errors } => {
            let codeword = BitKey::new(code.encode(&message)?)?;
            Ok(Some((offset.xor(&codeword)?, errors)))
        }
        DecodeOutcome::Failure => Ok(None),
    }
}

/// Who and what an enrollment refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollContext {
    pub token_id: [u8; 16],
    pub challenge: Challenge,
}

/// Public data kept by the verifier. Never contains `K_E` or the secret.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentRecord {
    pub record_id: [u8; 16],
    pub token_id: [u8; 16],
    pub challenge: Challenge,
    pub helper: HashHelper,
    pub code: Bch,
    pub code_offset: BitKey,
    pub digest_algorithm: u8,
    pub key_digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthOutcome {
    /// The decoder produced a key; compare it with [`verify`].
    Reproduced { key: BitKey, corrected: usize },
    /// The response was too far from the enrolled one.
    Rejected,
}

pub fn enroll(
    image: &SpeckleImage,
    hash: &HashConfig,
    code: &Bch,
    rng_seed: u64,
    context: EnrollContext,
) -> Result<(BitKey, EnrollmentRecord)> {
    if hash.m() != code.n() {
        return Err(invalid(format!(
            "hash length {} differs from code length {}",
            hash.m(),
            code.n()
        )));
    }
    let (key, helper) = hash.enroll(image)?;
    let code_offset = commit(&key, code, rng_seed)?;
    let record_id = record_id(&context, &helper, &code_offset);
    let record = EnrollmentRecord {
        record_id,
        token_id: context.token_id,
        challenge: context.challenge,
        helper,
        code: code.clone(),
        code_offset,
        digest_algorithm: DIGEST_SHA256,
        key_digest: key_digest(&key),
    };
    Ok((key, record))
}

fn record_id(context: &EnrollContext, helper: &HashHelper, offset: &BitKey) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update(b"specklepuf-record");
    h.update(context.token_id);
    h.update(context.challenge.to_bytes());
    h.update(helper.to_bytes());
    h.update(pack_bits(offset.bits()));
    h.finalize()[..16].try_into().unwrap()
}

pub fn authenticate(image: &SpeckleImage, record: &EnrollmentRecord) -> Result<AuthOutcome> {
    if image.dims() != record.helper.dims() {
        return Err(invalid(format!(
            "image is {}, record expects {}",
            image.dims(),
            record.helper.dims()
        )));
    }
    let noisy = record.helper.hash(image)?;
    authenticate_key(&noisy, record)
}

/// Authentication from an already computed hash `K_A'`.
pub fn authenticate_key(noisy: &BitKey, record: &EnrollmentRecord) -> Result<AuthOutcome> {
    Ok(match reproduce(noisy, &record.code_offset, &record.code)? {
        Some((key, corrected)) => AuthOutcome::Reproduced { key, corrected },
        None => AuthOutcome::Rejected,
    })
}

pub fn verify(key: &BitKey, record: &EnrollmentRecord) -> bool {
    record.digest_algorithm == DIGEST_SHA256 && key_digest(key) == record.key_digest
}

impl EnrollmentRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(RECORD_MAGIC.as_bytes());
        out.extend_from_slice(&RECORD_VERSION.to_le_bytes());
        out.extend_from_slice(&self.record_id);
        out.extend_from_slice(&self.token_id);
        put_blob(&mut out, &self.challenge.to_bytes());
        put_blob(&mut out, &self.helper.to_bytes());
        put_blob(&mut out, &self.code.to_bytes());
        put_bitstring(&mut out, self.code_offset.bits());
        out.push(self.digest_algorithm);
        out.extend_from_slice(&self.key_digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(RECORD_MAGIC)?;
        let version = r.u16_le()?;
        if version != RECORD_VERSION {
            return Err(FormatError::UnsupportedVersion(version).into());
        }
        let record_id = r.array::<16>()?;
        let token_id = r.array::<16>()?;
        let challenge = Challenge::from_bytes(r.blob()?)?;
        let helper = HashHelper::from_bytes(r.blob()?)?;
        let code = Bch::from_bytes(r.blob()?)?;
        let offset_bits = r.bitstring()?;
        let digest_algorithm = r.u8()?;
        let key_digest = r.array::<32>()?;
        r.finish()?;
        if offset_bits.len() != code.n() || helper.m() != code.n() {
            return Err(FormatError::Malformed("record lengths are inconsistent".into()).into());
        }
        let code_offset =
            BitKey::new(offset_bits).map_err(|e| FormatError::Malformed(e.to_string()))?;
        Ok(Self {
            record_id,
            token_id,
            challenge,
            helper,
            code,
            code_offset,
            digest_algorithm,
            key_digest,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn record_id_hex(&self) -> String {
        hex::encode(self.record_id)
    }
}

/// Key length of the long-key configuration: a 511-bit code word plus one
/// fixed pad bit.
pub const LONG_KEY_BITS: usize = 512;

/// BCH(511, t = 51) used with 512-bit framing.
pub fn long_key_code() -> Result<Bch> {
    Bch::new(9, 51)
}

/// Frames a 511-bit key to 512 bits with one zero pad bit.
pub fn frame_long_key(key: &BitKey) -> Result<BitKey> {
    if key.len() != LONG_KEY_BITS - 1 {
        return Err(invalid("long keys are 511 bits before framing"));
    }
    Ok(key.padded(1))
}
