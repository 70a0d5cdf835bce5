use std::io;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use super::wire::{read_frame, write_message, ErrorCode, FrameRead, ResultBody, WireMessage};
use crate::rng::BitStream;
use crate::token::Challenge;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("server error {}: {message}", code.name())]
    Remote { code: ErrorCode, message: String },
    #[error("unexpected reply: {0}")]
    Protocol(String),
}

/// Blocking client for the device service.
pub struct Client {
    stream: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_secs(60)))?;
        Ok(Self { stream })
    }

    /// Sends one message and waits for the reply.
    pub fn request(&mut self, msg: &WireMessage) -> Result<WireMessage, ClientError> {
        write_message(&mut self.stream, msg)?;
        self.read_reply()
    }

    /// Reads the next reply frame, e.g. after writing raw bytes with
    /// [`Client::stream`].
    pub fn read_reply(&mut self) -> Result<WireMessage, ClientError> {
        match read_frame(&mut self.stream)? {
            FrameRead::Frame(p) => {
                WireMessage::decode(&p).map_err(|e| ClientError::Protocol(e.to_string()))
            }
            other => Err(ClientError::Protocol(format!("no reply frame: {other:?}"))),
        }
    }

    /// The underlying socket, for sending hand-made frames.
    pub fn stream(&mut self) -> &mut TcpStream {
        &mut self.stream
    }

    /// Returns `(record_id, key digest)`.
    pub fn enroll(
        &mut self,
        token_id: [u8; 16],
        challenge: &Challenge,
    ) -> Result<([u8; 16], Vec<u8>), ClientError> {
        let msg = WireMessage::Enroll {
            token_id,
            challenge: challenge.to_bytes(),
        };
        match self.result(&msg)? {
            ResultBody::Enrolled {
                record_id, digest, ..
            } => Ok((record_id, digest)),
            other => Err(ClientError::Protocol(format!("{other:?}"))),
        }
    }

    /// Returns `(accepted, corrected bit count)`.
    pub fn authenticate(&mut self, record_id: [u8; 16]) -> Result<(bool, u32), ClientError> {
        match self.result(&WireMessage::Auth { record_id })? {
            ResultBody::Verdict {
                accepted,
                corrected,
            } => Ok((accepted, corrected)),
            other => Err(ClientError::Protocol(format!("{other:?}"))),
        }
    }

    pub fn random(&mut self, n_bits: u32) -> Result<BitStream, ClientError> {
        match self.result(&WireMessage::Random { n_bits })? {
            ResultBody::Random { n_bits: got, bytes } if got == n_bits => {
                BitStream::unpack(&bytes, n_bits as usize)
                    .map_err(|e| ClientError::Protocol(e.to_string()))
            }
            other => Err(ClientError::Protocol(format!("{other:?}"))),
        }
    }

    fn result(&mut self, msg: &WireMessage) -> Result<ResultBody, ClientError> {
        match self.request(msg)? {
            WireMessage::Result(body) => Ok(body),
            WireMessage::Error { code, message } => Err(ClientError::Remote { code, message }),
            other => Err(ClientError::Protocol(format!("{other:?}"))),
        }
    }
}
