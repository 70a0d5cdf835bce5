//! Device service: a framed TCP interface around enrollment, authentication
//! and random-bit generation for tokens the service owns.
//!
//! Clients never see speckle images, only record ids, digests, verdicts and
//! random bits.

mod client;
mod server;
mod store;
pub mod wire;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

pub use client::{Client, ClientError};
pub use server::{Server, ServerHandle};
pub use store::RecordStore;
pub use wire::{ErrorCode, ResultBody, WireError, WireMessage};

use crate::bch::Bch;
use crate::error::{Error, Result};
use crate::hashing::HashConfig;
use crate::protocol::{self, AuthOutcome, EnrollContext};
use crate::rng::{extract_bits, max_bits_per_image};
use crate::token::{Challenge, NoiseParams, PixelMask, TokenModel};

/// Largest RANDOM request served.
pub const MAX_RANDOM_BITS: u32 = 1 << 20;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store_dir: PathBuf,
    pub bch_m: u32,
    pub bch_t: usize,
    /// Capture noise for every enrollment and authentication. The noise
    /// seed is replaced by fresh entropy per capture.
    pub noise: NoiseParams,
    /// How long a partial frame may stall before it is answered with
    /// `bad_frame` and discarded.
    pub read_timeout: Duration,
}

impl ServiceConfig {
    /// BCH(255, t = 31), typical capture noise, 500 ms frame timeout.
    pub fn new(store_dir: impl Into<PathBuf>) -> Self {
        Self {
            store_dir: store_dir.into(),
            bch_m: 8,
            bch_t: 31,
            noise: NoiseParams::typical(),
            read_timeout: Duration::from_millis(500),
        }
    }
}

/// Request handling state shared by all sessions.
#[derive(Debug)]
pub struct Service {
    config: ServiceConfig,
    code: Bch,
    store: RecordStore,
    tokens: RwLock<HashMap<[u8; 16], Arc<TokenModel>>>,
    device_token: RwLock<Option<[u8; 16]>>,
    enroll_locks: Mutex<HashMap<[u8; 16], Arc<Mutex<()>>>>,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Result<Self> {
        config.noise.validate()?;
        let code = Bch::new(config.bch_m, config.bch_t)?;
        let store = RecordStore::open(&config.store_dir)?;
        Ok(Self {
            config,
            code,
            store,
            tokens: RwLock::new(HashMap::new()),
            device_token: RwLock::new(None),
            enroll_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn code(&self) -> &Bch {
        &self.code
    }

    pub fn store(&self) -> &RecordStore {
        &self.store
    }

    /// Takes ownership of a token and precomputes its field tensor so the
    /// first request does not pay for it. The first token added also serves
    /// RANDOM requests.
    pub fn add_token(&self, token: TokenModel) -> [u8; 16] {
        for i in 0..token.grid_dims().len() {
            token.pixel_field(i);
        }
        let id = token.token_id();
        self.tokens
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, Arc::new(token));
        let mut device = self.device_token.write().unwrap_or_else(|e| e.into_inner());
        device.get_or_insert(id);
        id
    }

    pub fn token(&self, id: &[u8; 16]) -> Option<Arc<TokenModel>> {
        self.tokens
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
    }

    fn fresh_noise(&self) -> NoiseParams {
        self.config.noise.with_seed(rand::random())
    }

    /// Decodes one payload and answers it. Never panics on malformed input.
    pub fn handle_payload(&self, payload: &[u8]) -> WireMessage {
        match WireMessage::decode(payload) {
            Ok(msg) => self.handle(&msg),
            Err(WireError::UnknownOpcode(op)) => WireMessage::error(
                ErrorCode::UnknownOpcode,
                format!("unknown opcode 0x{op:02x}"),
            ),
            Err(e @ WireError::BadFrame(_)) => {
                WireMessage::error(ErrorCode::BadFrame, e.to_string())
            }
        }
    }

    pub fn handle(&self, msg: &WireMessage) -> WireMessage {
        let reply = match msg {
            WireMessage::Enroll {
                token_id,
                challenge,
            } => self.enroll(token_id, challenge),
            WireMessage::Auth { record_id } => self.authenticate(record_id),
            WireMessage::Random { n_bits } => self.random(*n_bits),
            WireMessage::Result(_) | WireMessage::Error { .. } => {
                Err(Failure(ErrorCode::InvalidArgument, "not a request".into()))
            }
        };
        match reply {
            Ok(body) => WireMessage::Result(body),
            Err(Failure(code, message)) => WireMessage::Error { code, message },
        }
    }

    fn enroll(
        &self,
        token_id: &[u8; 16],
        challenge: &[u8],
    ) -> std::result::Result<ResultBody, Failure> {
        let token = self
            .token(token_id)
            .ok_or_else(|| not_found("token", token_id))?;
        let challenge = Challenge::from_bytes(challenge)
            .map_err(|e| Failure(ErrorCode::InvalidArgument, format!("challenge: {e}")))?;
        let lock = {
            let mut locks = self.enroll_locks.lock().unwrap_or_else(|e| e.into_inner());
            locks.entry(*token_id).or_default().clone()
        };
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let image = token.respond(&challenge, &self.fresh_noise())?;
        let hash = HashConfig::rbm(self.code.n(), rand::random());
        let context = EnrollContext {
            token_id: *token_id,
            challenge,
        };
        let (_key, record) = protocol::enroll(&image, &hash, &self.code, rand::random(), context)?;
        self.store.put(&record)?;
        Ok(ResultBody::Enrolled {
            record_id: record.record_id,
            digest_algorithm: record.digest_algorithm,
            digest: record.key_digest.to_vec(),
        })
    }

    fn authenticate(&self, record_id: &[u8; 16]) -> std::result::Result<ResultBody, Failure> {
        let record = self
            .store
            .get(record_id)?
            .ok_or_else(|| not_found("record", record_id))?;
        let token = self
            .token(&record.token_id)
            .ok_or_else(|| not_found("token", &record.token_id))?;
        let image = token.respond(&record.challenge, &self.fresh_noise())?;
        Ok(match protocol::authenticate(&image, &record)? {
            AuthOutcome::Reproduced { key, corrected } => ResultBody::Verdict {
                accepted: protocol::verify(&key, &record),
                corrected: corrected as u32,
            },
            AuthOutcome::Rejected => ResultBody::Verdict {
                accepted: false,
                corrected: 0,
            },
        })
    }

    fn random(&self, n_bits: u32) -> std::result::Result<ResultBody, Failure> {
        if n_bits == 0 || n_bits > MAX_RANDOM_BITS {
            return Err(Failure(
                ErrorCode::InvalidArgument,
                format!("bit count must be in 1..={MAX_RANDOM_BITS}"),
            ));
        }
        let device = *self.device_token.read().unwrap_or_else(|e| e.into_inner());
        let token = device
            .and_then(|id| self.token(&id))
            .ok_or_else(|| Failure(ErrorCode::NotFound, "no token available".into()))?;
        let mut bits = Vec::with_capacity(n_bits as usize);
        let mut rng = rand::rng();
        while bits.len() < n_bits as usize {
            let mask = PixelMask::random(token.grid_dims(), 0.5, &mut rng);
            let image = token.respond_pattern(&mask, &self.fresh_noise())?;
            let take = (n_bits as usize - bits.len()).min(max_bits_per_image(token.out_dims()));
            bits.extend_from_slice(extract_bits(&[image], rand::random(), take)?.bits());
        }
        Ok(ResultBody::Random {
            n_bits,
            bytes: crate::bits::pack_bits(&bits),
        })
    }
}

struct Failure(ErrorCode, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::Format(_) => ErrorCode::InvalidArgument,
            _ => ErrorCode::Internal,
        };
        Failure(code, e.to_string())
    }
}

fn not_found(what: &str, id: &[u8; 16]) -> Failure {
    Failure(
        ErrorCode::NotFound,
        format!("unknown {what} {}", hex::encode(id)),
    )
}
